// Serves a recorded dataset over the runner protocol (see SubprocessSource).
// Usage: replay_runner <dataset-dir> [--fail-after N] [--raw-names]

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "countertune/counters.hpp"
#include "countertune/tuning_space.hpp"

namespace ct = countertune;

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: replay_runner <dataset-dir> [--fail-after N] [--raw-names]\n";
    return 2;
  }
  long fail_after = -1;
  bool raw_names = false;
  for (int i = 2; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--fail-after" && i + 1 < argc) fail_after = std::atol(argv[++i]);
    else if (a == "--raw-names") raw_names = true;
  }
  try {
    const auto d = ct::load_dataset(ct::DatasetPaths::in_directory(argv[1]));
    const bool volta = d.arch().generation == ct::Generation::VoltaPlus;
    std::cout << "counters";
    for (std::size_t i = 0; i < ct::kHardwareCounterCount; ++i) {
      const auto& desc = ct::describe(ct::counter_at(i));
      std::cout << ',' << (raw_names ? (volta ? desc.volta_name : desc.pre_volta_name) : desc.abbreviation);
    }
    std::cout << std::endl;

    std::cout.precision(17);
    std::string line;
    long served = 0;
    while (std::getline(std::cin, line)) {
      if (line.empty()) continue;
      if (fail_after >= 0 && served >= fail_after) {
        std::cout << "error,runner budget exhausted" << std::endl;
        continue;
      }
      auto cells = split(line);
      if (cells.size() != d.space().parameters().size() + 1) {
        std::cout << "error,expected " << d.space().parameters().size() << " values and a profile flag" << std::endl;
        continue;
      }
      const bool profile = cells.back() == "1";
      cells.pop_back();
      std::vector<double> assignment;
      for (const auto& c : cells) assignment.push_back(std::strtod(c.c_str(), nullptr));
      const auto index = d.space().find(assignment);
      const auto* rec = index ? d.record_for(*index) : nullptr;
      if (!rec) {
        std::cout << "error,configuration not measured" << std::endl;
        continue;
      }
      ++served;
      std::cout << rec->runtime_us;
      if (profile) {
        std::cout << ',' << rec->global_threads;
        for (std::size_t i = 0; i < ct::kHardwareCounterCount; ++i) {
          const auto c = ct::counter_at(i);
          double v = rec->counters.value_or(c, 0.0);
          if (raw_names && volta) v /= ct::describe(c).volta_scale;
          std::cout << ',' << v;
        }
      }
      std::cout << std::endl;
    }
  } catch (const std::exception& e) {
    std::cout << "error," << e.what() << std::endl;
    return 1;
  }
  return 0;
}
