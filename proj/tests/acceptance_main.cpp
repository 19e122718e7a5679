// Acceptance suite runner: one line per criterion, nonzero exit on any
// failure.  The same checks back `qkdsim verify`.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "qkdsim/verify.hpp"

int main(int argc, char** argv) {
  std::uint64_t seed = 12345;
  if (argc > 1) seed = std::strtoull(argv[1], nullptr, 0);
  const std::filesystem::path out = std::filesystem::temp_directory_path() / "qkdsim_acceptance";
  std::filesystem::remove_all(out);
  std::filesystem::create_directories(out);

  const auto results = qkd::app::run_acceptance(seed, out);
  const int failures = qkd::app::write_acceptance_results(results, out, std::cout);
  for (const auto& r : results)
    std::fprintf(stderr, "  criterion %d ran in %.2fs\n", r.id, r.elapsed_s);
  if (failures) {
    std::cout << failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all 10 criteria passed\n";
  return 0;
}
