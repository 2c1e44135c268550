# Synthetic and IDX datasets, Dirichlet client partitions.
