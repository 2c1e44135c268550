# Federated training simulation and its models.
