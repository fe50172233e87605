"""Layer stacks of spline activations with analytic gradients.

A layer maps n inputs to m outputs; output i is the sum over input features
j of a learned univariate spline activation applied to x_j.  Under the "kan"
initialisation each activation also carries a scaled SiLU base term:

    phi_{i,j}(z) = w_s[i,j] * spline_{i,j}(z) + w_b[i,j] * silu(z)

Every input feature of every layer owns a grid domain and an EMA histogram;
with ``record=True`` the forward pass updates the histograms and runs the
domain adaptation before evaluating, so layers adapt to the data they are
about to see.

Gradients are computed in closed form: reverse mode for weights and inputs,
plus optional forward tangent channels (directional derivatives of the
outputs w.r.t. the inputs) whose reverse pass supplies exact parameter
gradients for losses built on input-gradients, e.g. Lie-derivative terms.
All per-layer math is vectorised over batch and features at once.
"""

from __future__ import annotations

import numpy as np

from .adapt import AdaptConfig, apply_adapt, decide, manual_adapt
from .histogram import FeatureHistogram
from .spline import M_CUBIC, GridDomain, greville_abscissae, refine_grid


class NonFiniteError(FloatingPointError):
    """Raised when a layer produces or receives non-finite values."""

    def __init__(self, layer: int, where: str = "activations"):
        super().__init__(f"non-finite {where} in layer {layer}")
        self.layer = layer


def _sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def silu(z):
    return z * _sigmoid(z)


def silu_d1(z):
    s = _sigmoid(z)
    return s * (1.0 + z * (1.0 - s))


def silu_d2(z):
    s = _sigmoid(z)
    return s * (1.0 - s) * (2.0 + z * (1.0 - 2.0 * s))


def _pows(theta: np.ndarray) -> np.ndarray:
    """[theta^3, theta^2, theta, 1] stacked on a trailing axis."""
    out = np.empty(theta.shape + (4,))
    t2 = theta * theta
    out[..., 0] = t2 * theta
    out[..., 1] = t2
    out[..., 2] = theta
    out[..., 3] = 1.0
    return out


def _pows_d1(theta: np.ndarray) -> np.ndarray:
    out = np.empty(theta.shape + (4,))
    out[..., 0] = 3.0 * theta * theta
    out[..., 1] = 2.0 * theta
    out[..., 2] = 1.0
    out[..., 3] = 0.0
    return out


def _pows_d2(theta: np.ndarray) -> np.ndarray:
    out = np.empty(theta.shape + (4,))
    out[..., 0] = 6.0 * theta
    out[..., 1] = 2.0
    out[..., 2] = 0.0
    out[..., 3] = 0.0
    return out


class AdaptKanLayer:
    """One spline layer: n input features, m outputs.

    ``coef`` has shape (n, m, omega + k): coef[j][i] are the spline weights
    of activation (i, j).  ``w_s``/``w_b`` (n, m) scale the spline and SiLU
    base terms and are only active when ``use_base`` is set.
    """

    def __init__(self, n: int, m: int, domains, hists, coef, w_s, w_b, use_base: bool):
        self.n = n
        self.m = m
        self.domains = list(domains)
        self.hists = list(hists)
        self.coef = np.asarray(coef, dtype=float)
        self.w_s = np.asarray(w_s, dtype=float)
        self.w_b = np.asarray(w_b, dtype=float)
        self.use_base = use_base

    @property
    def omega(self) -> int:
        return self.domains[0].omega

    def _locate(self, Z: np.ndarray):
        """(bins, theta, inside) across all features at once."""
        a = np.array([dom.a for dom in self.domains])
        d = np.array([dom.d for dom in self.domains])
        omega = np.array([dom.omega for dom in self.domains])
        u = (Z - a) / d
        bins = np.clip(np.floor(u), 0.0, omega - 1)
        theta = np.clip(u - bins, 0.0, 1.0)
        inside = (u >= 0.0) & (u <= omega)
        return bins.astype(np.int64), theta, inside

    def _window(self, bins: np.ndarray):
        """Active coefficient windows: (B, n, k+1, m)."""
        idx = bins[:, :, None] + np.arange(4)
        coef_t = self.coef.transpose(0, 2, 1)  # (n, P, m)
        return coef_t[np.arange(self.n)[None, :, None], idx], idx


class AdaptKanNet:
    """Stack of layers plus the adaptation configuration."""

    def __init__(self, layers, cfg: AdaptConfig | None = None):
        self.layers = list(layers)
        self.cfg = cfg if cfg is not None else AdaptConfig()
        self.adapt_events = 0
        for a, b in zip(self.layers[:-1], self.layers[1:]):
            if a.m != b.n:
                raise ValueError(f"layer widths do not chain: {a.m} -> {b.n}")

    @property
    def shape(self):
        return [self.layers[0].n] + [ly.m for ly in self.layers]

    @property
    def omega(self) -> int:
        return self.layers[0].omega

    # ------------------------------------------------------------------
    # histogram recording and adaptation
    # ------------------------------------------------------------------

    def _observe(self, li: int, Z: np.ndarray) -> None:
        """Update histograms for layer li's inputs, then adapt stale domains."""
        layer = self.layers[li]
        if not np.all(np.isfinite(Z)):
            raise NonFiniteError(li, "inputs")
        for j in range(layer.n):
            layer.hists[j].update(Z[:, j])
            decision = decide(layer.hists[j], self.cfg)
            if decision.kind != "none":
                dom, coef, hist = apply_adapt(
                    layer.domains[j], layer.coef[j], layer.hists[j], decision, self.cfg)
                layer.domains[j] = dom
                layer.coef[j] = coef
                layer.hists[j] = hist
                self.adapt_events += 1

    def adapt_all(self) -> int:
        """Run the adaptation check on every layer feature; returns event count."""
        before = self.adapt_events
        for layer in self.layers:
            for j in range(layer.n):
                decision = decide(layer.hists[j], self.cfg)
                if decision.kind != "none":
                    dom, coef, hist = apply_adapt(
                        layer.domains[j], layer.coef[j], layer.hists[j], decision, self.cfg)
                    layer.domains[j] = dom
                    layer.coef[j] = coef
                    layer.hists[j] = hist
                    self.adapt_events += 1
        return self.adapt_events - before

    def manual_adapt_all(self, X: np.ndarray) -> None:
        """Snap every domain to the min/max of this batch (naive baseline)."""
        Z = np.asarray(X, dtype=float)
        for li, layer in enumerate(self.layers):
            for j in range(layer.n):
                dom, coef, hist = manual_adapt(
                    layer.domains[j], layer.coef[j], layer.hists[j], Z[:, j], self.cfg)
                layer.domains[j] = dom
                layer.coef[j] = coef
                layer.hists[j] = hist
            Z, _ = self._layer_eval(li, Z)

    def refine_all(self, new_omega: int) -> float:
        """Increase every layer's grid interval count on fixed bounds.

        Weights are refit by least squares and histograms transferred to the
        new bin count.  Optimiser state tied to the old coefficient shapes
        becomes invalid after this call.  Returns the worst refit residual
        (max absolute deviation on the fitting grid) across all features.
        """
        worst = 0.0
        for layer in self.layers:
            new_coef = np.empty((layer.n, layer.m, new_omega + layer.domains[0].k))
            for j in range(layer.n):
                w, dom, info = refine_grid(layer.coef[j], layer.domains[j], new_omega)
                new_coef[j] = w
                layer.domains[j] = dom
                layer.hists[j] = layer.hists[j].refit(dom)
                worst = max(worst, info.max_err)
            layer.coef = new_coef
        return worst

    # ------------------------------------------------------------------
    # forward / reverse
    # ------------------------------------------------------------------

    def _layer_eval(self, li: int, Z: np.ndarray):
        """Evaluate layer li on inputs Z, caching what the backward needs."""
        layer = self.layers[li]
        bins, theta, inside = layer._locate(Z)
        d = np.array([dom.d for dom in layer.domains])
        C = _pows(theta) @ M_CUBIC.T                      # (B, n, 4)
        C1 = (_pows_d1(theta) @ M_CUBIC.T) / d[:, None]
        C1[~inside] = 0.0
        W, idx = layer._window(bins)                      # (B, n, 4, m)
        S = np.einsum("bnsm,bns->bnm", W, C)
        Sp = np.einsum("bnsm,bns->bnm", W, C1)
        if layer.use_base:
            phi = layer.w_s[None] * S + layer.w_b[None] * silu(Z)[:, :, None]
        else:
            phi = S
        Y = phi.sum(axis=1)
        if not np.all(np.isfinite(Y)):
            raise NonFiniteError(li)
        cache = {"Z": Z, "bins": bins, "theta": theta, "inside": inside,
                 "idx": idx, "C": C, "C1": C1, "S": S, "Sp": Sp}
        return Y, cache

    def forward(self, X, record: bool = False):
        """Run the stack; with ``record`` update histograms and adapt first.

        Returns (outputs, caches); pass the caches to :meth:`backward`.
        """
        Z = np.asarray(X, dtype=float)
        if Z.ndim != 2 or Z.shape[1] != self.layers[0].n:
            raise ValueError(f"expected input of width {self.layers[0].n}, got shape {Z.shape}")
        caches = []
        for li in range(len(self.layers)):
            if record:
                self._observe(li, Z)
            Z, cache = self._layer_eval(li, Z)
            caches.append(cache)
        return Z, caches

    def _scatter_coef(self, layer: AdaptKanLayer, idx: np.ndarray, V: np.ndarray):
        """Accumulate window-local values V (B, n, 4, m) into coef-shaped grads."""
        P, m = layer.coef.shape[2], layer.m
        flat = (np.arange(layer.n)[None, :, None] * P + idx)[..., None] * m + np.arange(m)
        acc = np.bincount(flat.ravel(), weights=V.ravel(), minlength=layer.n * P * m)
        return acc.reshape(layer.n, P, m).transpose(0, 2, 1)

    def backward(self, caches, grad_out, activation_grads=None):
        """Reverse-mode gradients from an output cotangent.

        ``activation_grads`` optionally adds a per-activation cotangent
        (list over layers of (B, n, m) arrays), used by regularisers that
        act on individual activation values before they are summed.
        Returns (per-layer gradient dicts, gradient w.r.t. the inputs).
        """
        G = np.asarray(grad_out, dtype=float)
        grads = [None] * len(self.layers)
        for li in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[li]
            c = caches[li]
            Z, idx, C, C1, S, Sp = c["Z"], c["idx"], c["C"], c["C1"], c["S"], c["Sp"]
            E = G[:, None, :] if activation_grads is None else G[:, None, :] + activation_grads[li]
            scale = layer.w_s[None] if layer.use_base else 1.0
            dcoef = self._scatter_coef(layer, idx, (E * scale)[:, :, None, :] * C[..., None])
            if layer.use_base:
                sv = silu(Z)
                dws = (E * S).sum(axis=0)
                dwb = (E * sv[:, :, None]).sum(axis=0)
                dphi = layer.w_s[None] * Sp + layer.w_b[None] * silu_d1(Z)[:, :, None]
            else:
                dws = np.zeros_like(layer.w_s)
                dwb = np.zeros_like(layer.w_b)
                dphi = Sp
            G = (E * dphi).sum(axis=2)
            grads[li] = {"coef": dcoef, "w_s": dws, "w_b": dwb}
        return grads, G

    # ------------------------------------------------------------------
    # forward tangents (directional input derivatives) and their reverse
    # ------------------------------------------------------------------

    def forward_jvp(self, X, tangents, record: bool = False):
        """Forward pass carrying T tangent channels per sample.

        ``tangents`` has shape (B, n, T); channel t propagates the
        directional derivative of every intermediate along tangents[:, :, t].
        Returns (Y, Ydot, caches) with Ydot of shape (B, m, T).
        """
        Z = np.asarray(X, dtype=float)
        Zdot = np.asarray(tangents, dtype=float)
        if Zdot.shape[:2] != Z.shape:
            raise ValueError(f"tangent shape {Zdot.shape} does not match input {Z.shape}")
        caches = []
        for li in range(len(self.layers)):
            if record:
                self._observe(li, Z)
            layer = self.layers[li]
            Y, cache = self._layer_eval(li, Z)
            if layer.use_base:
                dphi = layer.w_s[None] * cache["Sp"] + layer.w_b[None] * silu_d1(Z)[:, :, None]
            else:
                dphi = cache["Sp"]
            Ydot = np.einsum("bnm,bnt->bmt", dphi, Zdot)
            cache["Zdot"] = Zdot
            cache["dphi"] = dphi
            caches.append(cache)
            Z, Zdot = Y, Ydot
        return Z, Zdot, caches

    def backward_jvp(self, caches, grad_out, grad_out_dot):
        """Reverse pass over :meth:`forward_jvp`'s computation.

        ``grad_out`` (B, m) is the cotangent of the outputs, ``grad_out_dot``
        (B, m, T) the cotangent of the tangent channels.  Returns per-layer
        parameter gradient dicts plus input/tangent cotangents; curvature
        (second-derivative) terms of the splines and SiLU enter here.
        """
        G = np.asarray(grad_out, dtype=float)
        Gdot = np.asarray(grad_out_dot, dtype=float)
        grads = [None] * len(self.layers)
        for li in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[li]
            c = caches[li]
            Z, Zdot, idx = c["Z"], c["Zdot"], c["idx"]
            C, C1, S, Sp, dphi = c["C"], c["C1"], c["S"], c["Sp"], c["dphi"]
            d = np.array([dom.d for dom in layer.domains])
            C2 = (_pows_d2(c["theta"]) @ M_CUBIC.T) / d[:, None] ** 2
            C2[~c["inside"]] = 0.0
            W, _ = layer._window(c["bins"])
            Spp = np.einsum("bnsm,bns->bnm", W, C2)
            Ej = np.einsum("bit,bjt->bji", Gdot, Zdot)  # tangent cotangent folded
            GB = G[:, None, :]
            scale = layer.w_s[None] if layer.use_base else 1.0
            V = (GB * scale)[:, :, None, :] * C[..., None] \
                + (Ej * scale)[:, :, None, :] * C1[..., None]
            dcoef = self._scatter_coef(layer, idx, V)
            if layer.use_base:
                sv, sd1, sd2 = silu(Z), silu_d1(Z), silu_d2(Z)
                dws = (GB * S + Ej * Sp).sum(axis=0)
                dwb = (GB * sv[:, :, None] + Ej * sd1[:, :, None]).sum(axis=0)
                ddphi = layer.w_s[None] * Spp + layer.w_b[None] * sd2[:, :, None]
            else:
                dws = np.zeros_like(layer.w_s)
                dwb = np.zeros_like(layer.w_b)
                ddphi = Spp
            gZ = (GB * dphi).sum(axis=2) + (Ej * ddphi).sum(axis=2)
            gZdot = np.einsum("bit,bji->bjt", Gdot, dphi)
            grads[li] = {"coef": dcoef, "w_s": dws, "w_b": dwb}
            G, Gdot = gZ, gZdot
        return grads, G, Gdot

    # ------------------------------------------------------------------
    # parameter plumbing
    # ------------------------------------------------------------------

    def parameters(self):
        """Current trainable arrays, in a stable order."""
        params = []
        for layer in self.layers:
            params.append(layer.coef)
            if layer.use_base:
                params.append(layer.w_s)
                params.append(layer.w_b)
        return params

    def gradient_list(self, grads):
        """Flatten per-layer gradient dicts to match :meth:`parameters`."""
        out = []
        for layer, g in zip(self.layers, grads):
            out.append(g["coef"])
            if layer.use_base:
                out.append(g["w_s"])
                out.append(g["w_b"])
        return out


def init_network(shape, mode: str = "kan", noise: float = 0.5, seed: int = 0,
                 omega: int = 3, k: int = 3, domain=(-1.0, 1.0),
                 cfg: AdaptConfig | None = None, slope: float | None = None) -> AdaptKanNet:
    """Build a network with fresh domains ([-1, 1] per feature by default).

    "kan" mode draws spline coefficients as noise * N(0, 1) and adds the
    scaled SiLU base term (scales start at 1).  "linear" mode sets the
    coefficients to samples of a line at the Greville points (random slope
    per activation unless ``slope`` is given) plus noise * N(0, 1), with no
    base term, so noise=0 yields an exactly linear network.
    """
    if mode not in ("kan", "linear"):
        raise ValueError(f"unknown init mode {mode!r}")
    if len(shape) < 2:
        raise ValueError("shape needs at least input and output widths")
    cfg = cfg if cfg is not None else AdaptConfig()
    rng = np.random.default_rng(seed)
    layers = []
    for n, m in zip(shape[:-1], shape[1:]):
        domains = [GridDomain(domain[0], domain[1], omega, k) for _ in range(n)]
        hists = [FeatureHistogram(domains[j], cfg.alpha) for j in range(n)]
        P = omega + k
        if mode == "kan":
            coef = noise * rng.standard_normal((n, m, P))
            w_s = np.ones((n, m))
            w_b = np.ones((n, m))
            use_base = True
        else:
            g = greville_abscissae(domains[0])
            slopes = (np.full((n, m), float(slope)) if slope is not None
                      else rng.standard_normal((n, m)))
            coef = slopes[:, :, None] * g + noise * rng.standard_normal((n, m, P))
            w_s = np.ones((n, m))
            w_b = np.zeros((n, m))
            use_base = False
        layers.append(AdaptKanLayer(n, m, domains, hists, coef, w_s, w_b, use_base))
    return AdaptKanNet(layers, cfg)


def sparsity_penalty(net: AdaptKanNet, caches, lam: float):
    """L1 penalty on activation magnitudes, averaged over batch and activations.

    Returns (value, per-layer activation cotangents) so the penalty can be
    folded into a backward pass.  lam = 0 short-circuits to (0, None).
    """
    if lam == 0.0:
        return 0.0, None
    n_act = sum(ly.n * ly.m for ly in net.layers)
    total = 0.0
    extras = []
    for layer, cache in zip(net.layers, caches):
        Z, S = cache["Z"], cache["S"]
        B = Z.shape[0]
        if layer.use_base:
            act = layer.w_s[None] * S + layer.w_b[None] * silu(Z)[:, :, None]
        else:
            act = S
        total += np.abs(act).sum() / B
        extras.append(lam * np.sign(act) / (B * n_act))
    return lam * total / n_act, extras
