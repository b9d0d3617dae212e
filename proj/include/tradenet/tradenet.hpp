#pragma once

#include "tradenet/common.hpp"
#include "tradenet/corpus.hpp"
#include "tradenet/csv.hpp"
#include "tradenet/fetch.hpp"
#include "tradenet/gravity.hpp"
#include "tradenet/mixture.hpp"
#include "tradenet/netgraph.hpp"
#include "tradenet/pipeline.hpp"
#include "tradenet/report.hpp"
#include "tradenet/synthetic.hpp"
