"""HTTP control plane: session management, steering, metric streams."""
