# Pruning LP, alternating optimizer and baseline schemes.
