# Copyright 2026 The grafiq Authors
# SPDX-License-Identifier: Apache-2.0
"""BN-statistics loss over random observation lists, accumulated with
math.fsum so the reference carries no summation-order error."""

import math

import numpy as np

from emit import Emitter

rng = np.random.default_rng(4)
out = Emitter("loss", "gen_loss.py")
sets = []
for k in range(100):
    layers = int(rng.integers(1, 7))
    per_layer = []
    layer_lines = []
    for _ in range(layers):
        c = int(rng.integers(1, 9))
        scale = 10.0 ** rng.uniform(-3, 1)
        mu, mu_s = rng.normal(0, scale, c), rng.normal(0, scale, c)
        sd, sd_s = rng.uniform(0, 2 * scale, c), rng.uniform(0, 2 * scale, c)
        per_layer.append(math.fsum([(x - y) ** 2 for x, y in zip(mu, mu_s)] +
                                   [(x - y) ** 2 for x, y in zip(sd, sd_s)]))
        arr = lambda v: "{" + ", ".join(repr(float(x)) for x in v) + "}"
        layer_lines.append(f"{{{arr(mu)}, {arr(sd)}, {arr(mu_s)}, {arr(sd_s)}}}")
    loss = math.fsum(per_layer) / layers
    sets.append(f"{{{{{', '.join(layer_lines)}}}, {loss!r}}}")
out.raw("inline const std::vector<GoldenLossSet> loss_sets{" + ",\n".join(sets) + "};")
out.write()
