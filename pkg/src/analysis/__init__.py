# Generalization statements and the convergence bound.
