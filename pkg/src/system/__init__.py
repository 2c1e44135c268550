# Channel, hardware and per-round cost models.
