"""Services package - network, loss, training and verification logic."""
