#pragma once

namespace gpct {

/// Constants of the plant, gain schedule and desired trajectory consumed by
/// the stability analysis.
struct SystemBounds {
  double h1 = 0.0;  ///< min eigenvalue of H(q)
  double h2 = 0.0;  ///< max eigenvalue of H(q)
  double k_c = 0.0; ///< ||C(q, qdot)|| <= k_c ||qdot||
  double k_d1 = 0.0;
  double k_d2 = 0.0;
  double k_p1 = 0.0;
  double k_p2 = 0.0;
  double q_d_bar = 0.0;     ///< sup ||q_d||
  double qdot_d_bar = 0.0;  ///< sup ||qdot_d||
  double delta_bar = 0.0;   ///< sup ||beta^T Var^{1/2}||

  void validate() const;
};

}  // namespace gpct
