"""Numerical laboratory for hypocoercive decay: operators, certificates,
semigroup experiments, entropy methods and a nonlinear Vlasov-Fokker-Planck
instance."""

__version__ = "0.1.0"
