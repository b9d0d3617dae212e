// Writes a synthetic corpus (flows, GDP, coordinates, unions) with planted
// structure, plus a config.json pointing at it.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <iostream>

#include "tradenet/csv.hpp"
#include "tradenet/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic trade corpus"};
  tradenet::synthetic::CorpusSpec spec;
  std::string dir;
  app.add_option("dir", dir, "Output directory")->required();
  app.add_option("--countries", spec.countries, "Number of countries");
  app.add_option("--regions", spec.regions, "Number of regions (1-8)");
  app.add_option("--year", spec.year, "Year of the flows");
  app.add_option("--seed", spec.seed, "Generator seed");
  app.add_option("--alpha", spec.alpha, "GDP exponent used to generate flows");
  app.add_option("--gdp-gaps", spec.gdp_gaps, "Countries without GDP for the year");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto corpus = tradenet::synthetic::generate(spec);
    tradenet::synthetic::write_corpus(corpus, dir);
    const nlohmann::json cfg = {{"flows", "flows.csv"},       {"gdp", "gdp.csv"},
                                {"coordinates", "coordinates.csv"}, {"unions", "unions.txt"},
                                {"years", std::to_string(spec.year)}, {"alpha", 1.0},
                                {"alpha_s", 0.05},            {"seed", 42},
                                {"em_tol", 1e-6},             {"pml_tol", 1e-8},
                                {"out", "out"},               {"cache", "cache"}};
    tradenet::csv::write_text_file(std::filesystem::path(dir) / "config.json", cfg.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
