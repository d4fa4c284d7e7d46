# fidelity-bounds
