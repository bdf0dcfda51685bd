#pragma once

namespace catenc {

// Regularized incomplete beta I_x(a, b), evaluated with the Lentz continued
// fraction. Accurate to ~1e-14 for the arguments used here.
double incomplete_beta(double a, double b, double x);

// CDF of Student's t with df degrees of freedom.
double student_t_cdf(double t, double df);

// Two-sided p-value for an observed t statistic.
double student_t_two_sided_p(double t, double df);

}  // namespace catenc
