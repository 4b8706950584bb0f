// Writes case-study scenarios and the example pipelines to disk.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "fdf/casestudies.hpp"
#include "fdf/diagnostic.hpp"
#include "fdf/store.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Generate case-study data and pipelines", "fdf-casegen"};
  app.require_subcommand(1);

  std::string dir;
  fdf::cases::ScenarioOptions opts;
  auto add_common = [&](CLI::App* c) {
    c->add_option("dir", dir, "Output directory")->required();
    c->add_option("--seed", opts.seed, "Data seed");
    c->add_option("--train", opts.train, "Training samples");
    c->add_option("--held-out", opts.held_out, "Exploitation samples");
  };
  auto* strain = app.add_subcommand("strain", "Plastic strain from impact images");
  add_common(strain);
  auto* bearing = app.add_subcommand("bearing", "Magnetic bearing flux");
  add_common(bearing);
  bearing->add_option("--bias", opts.instance_bias, "Instance deviation from nominal");
  bearing->add_flag("--variant", opts.variant, "Correction model composed after the nominal one");
  auto* fixtures = app.add_subcommand("fixtures", "Write every example pipeline as <name>.fdf");
  fixtures->add_option("dir", dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*strain) fdf::cases::write_strain_scenario(dir, opts);
    if (*bearing) fdf::cases::write_bearing_scenario(dir, opts);
    if (*fixtures) {
      fs::create_directories(dir);
      for (const auto& f : fdf::cases::fixtures())
        fdf::atomic_write(fs::path(dir) / (f.name + ".fdf"), f.text);
    }
  } catch (const fdf::Error& e) {
    std::cerr << "ERROR " << e.code() << " " << e.what() << "\n";
    return 1;
  }
  std::cout << "wrote " << dir << "\n";
  return 0;
}
