"""Physical-layer MIMO simulation core: arrays, channels, path loss, transceivers, links and networks."""
