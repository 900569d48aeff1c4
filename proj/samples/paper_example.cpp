// Walks through the builtin example: merit values, a stationarity check and a penalty solve.
#include "vep/vep.hpp"

#include <iostream>

int main() {
  using namespace vep;
  const VepProblem P = load_problem("example:paper");

  for (auto [xi, x] : {std::pair{0.0, 0.0}, std::pair{1.0, 0.0}, std::pair{0.0, 1.0}}) {
    const auto ev = eval_merit(P, vec({xi}), vec({x}));
    std::cout << "merit(" << xi << ", " << x << ") = " << ev.merit << "  (nu " << ev.nu << ", mu " << ev.mu << ")\n";
  }

  const auto st = check_stationarity_general(P, vec({0.0}), vec({1.0}), {0.5}, 0.5);
  std::cout << "stationarity at (0, 1): " << stationarity_name(st.verdict) << ", residual " << st.residual << "\n";

  PenaltyConfig cfg;
  cfg.seed = 7;
  const auto res = solve_penalized(P, cfg, default_starts(P, 4, 7));
  std::cout << "solve: " << res.status << " at (" << res.xi[0] << ", " << res.x[0] << "), objective " << res.objective
            << ", lambda " << res.lambda << "\n";
}
