"""Element-level numerics: gas model, quadrature, bases, DG operator, limiters, time steps and integrators."""
