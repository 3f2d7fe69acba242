"""Host side of the monitor: bundles, integration, CLI commands, the socket service and soundness runs."""
