#pragma once

#include <string>

namespace specgram {

// Evaluate a sparsity-parameter expression in n: a plain number, "n",
// "sqrt(n)", "n^0.4", "n^(1/3)", optionally scaled as in "0.5*sqrt(n)".
double eval_q_expression(const std::string& expr, int n);

}  // namespace specgram
