"""Radio channel, propagation and energy models."""
