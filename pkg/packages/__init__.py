# gl-duality
