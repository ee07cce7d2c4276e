# Copyright 2026 The grafiq Authors
# SPDX-License-Identifier: Apache-2.0
"""Forward kernels by explicit loops, VJPs by torch autograd (float64)."""

import numpy as np
import torch

from emit import Emitter

torch.set_default_dtype(torch.float64)
rng = np.random.default_rng(20261014)
out = Emitter("kernels", "gen_kernels.py")


def conv_loops(x, w, stride, pad):
    c_in, h, wd = x.shape
    c_out, _, kh, kw = w.shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    y = np.zeros((c_out, ho, wo))
    for o in range(c_out):
        for i in range(ho):
            for j in range(wo):
                acc = 0.0
                for c in range(c_in):
                    for u in range(kh):
                        for v in range(kw):
                            r, s = i * stride - pad + u, j * stride - pad + v
                            if 0 <= r < h and 0 <= s < wd:
                                acc += x[c, r, s] * w[o, c, u, v]
                y[o, i, j] = acc
    return y


def vjp(fn, args, grad_out):
    ts = [torch.tensor(a, requires_grad=True) for a in args]
    y = fn(*ts)
    (y * torch.tensor(grad_out)).sum().backward()
    return [t.grad.numpy() for t in ts]


# conv2d, 3x3 stride 2 pad 1 and stride 1 pad 1, 1x1 stride 2 pad 0
x = rng.normal(size=(2, 5, 5))
w = rng.normal(size=(3, 2, 3, 3))
w1 = rng.normal(size=(3, 2, 1, 1))
out.tensor("conv_x", x)
out.tensor("conv_w", w)
out.tensor("conv_w1", w1)
for tag, weights, stride, pad in (("s2p1", w, 2, 1), ("s1p1", w, 1, 1), ("1x1s2", w1, 2, 0)):
    y = conv_loops(x, weights, stride, pad)
    out.tensor(f"conv_{tag}_y", y)
    g = rng.normal(size=y.shape)
    out.tensor(f"conv_{tag}_gy", g)
    (gx,) = vjp(lambda t: torch.nn.functional.conv2d(t[None], torch.tensor(weights), stride=stride, padding=pad)[0],
                [x], g)
    out.tensor(f"conv_{tag}_gx", gx)

# bn inference on [2,2,2]
eps = 1e-5
bx = rng.normal(size=(2, 2, 2))
mean = np.array([0.3, -0.7])
sd = np.array([1.5, 0.25])
gamma = np.array([0.8, 1.3])
beta = np.array([0.1, -0.2])
by = np.empty_like(bx)
for c in range(2):
    by[c] = gamma[c] * (bx[c] - mean[c]) / np.sqrt(sd[c] ** 2 + eps) + beta[c]
for ident, v in (("bn_x", bx), ("bn_mean", mean), ("bn_std", sd), ("bn_gamma", gamma), ("bn_beta", beta),
                 ("bn_y", by)):
    out.tensor(ident, v)
out.scalar("bn_eps", eps)
bg = rng.normal(size=bx.shape)
out.tensor("bn_gy", bg)
(bgx,) = vjp(lambda t: torch.tensor(gamma)[:, None, None] * (t - torch.tensor(mean)[:, None, None])
             / torch.sqrt(torch.tensor(sd)[:, None, None] ** 2 + eps) + torch.tensor(beta)[:, None, None], [bx], bg)
out.tensor("bn_gx", bgx)

# prelu, with values away from the kink
px = rng.normal(size=(3, 2, 4))
px[np.abs(px) < 0.05] = 0.5
slope = np.array([0.25, -0.1, 0.6])
py = np.where(px > 0, px, slope[:, None, None] * px)
out.tensor("prelu_x", px)
out.tensor("prelu_slope", slope)
out.tensor("prelu_y", py)
pg = rng.normal(size=px.shape)
out.tensor("prelu_gy", pg)
(pgx,) = vjp(lambda t: torch.where(t > 0, t, torch.tensor(slope)[:, None, None] * t), [px], pg)
out.tensor("prelu_gx", pgx)
(rgx,) = vjp(lambda t: torch.relu(t), [px], pg)
out.tensor("relu_y", np.maximum(px, 0.0))
out.tensor("relu_gx", rgx)

# linear on a [2,2,3] input flattened in channel-major order
lx = rng.normal(size=(2, 2, 3))
lw = rng.normal(size=(5, 12))
lb = rng.normal(size=5)
ly = np.array([sum(lw[o, k] * lx.reshape(-1)[k] for k in range(12)) + lb[o] for o in range(5)])
out.tensor("linear_x", lx)
out.tensor("linear_w", lw)
out.tensor("linear_b", lb)
out.tensor("linear_y", ly)
lg = rng.normal(size=5)
out.tensor("linear_gy", lg)
(lgx,) = vjp(lambda t: torch.tensor(lw) @ t.reshape(-1) + torch.tensor(lb), [lx], lg)
out.tensor("linear_gx", lgx)

# global average pool
gx_in = rng.normal(size=(3, 2, 5))
out.tensor("gap_x", gx_in)
out.tensor("gap_y", np.array([gx_in[c].sum() / 10.0 for c in range(3)]))
gg = rng.normal(size=3)
out.tensor("gap_gy", gg)
(ggx,) = vjp(lambda t: t.mean(dim=(1, 2)), [gx_in], gg)
out.tensor("gap_gx", ggx)

# sample statistics of a [4,3,3] tensor, biased std
sx = rng.normal(size=(4, 3, 3)) * np.array([1.0, 2.0, 0.5, 3.0])[:, None, None] + np.arange(4)[:, None, None]
smean = np.array([sum(sx[c].reshape(-1)) / 9.0 for c in range(4)])
sstd = np.array([np.sqrt(sum((v - smean[c]) ** 2 for v in sx[c].reshape(-1)) / 9.0) for c in range(4)])
out.tensor("stats_x", sx)
out.tensor("stats_mean", smean)
out.tensor("stats_std", sstd)

# derivative of <g_mean, mean(x)> + <g_std, std(x)> with respect to x
gm = rng.normal(size=4)
gs = rng.normal(size=4)
out.tensor("stats_gmean", gm)
out.tensor("stats_gstd", gs)


def stats_fn(t):
    m = t.mean(dim=(1, 2))
    s = torch.sqrt(((t - m[:, None, None]) ** 2).mean(dim=(1, 2)))
    return torch.cat([m, s])


(sgx,) = vjp(stats_fn, [sx], np.concatenate([gm, gs]))
out.tensor("stats_gx", sgx)

out.write()
