# Experiment harness: presets, config grammar, run and sweep.
