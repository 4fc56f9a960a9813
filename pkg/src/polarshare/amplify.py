"""Privacy amplification and the end-to-end secret-sharing pipeline.

A secret is distilled by hashing the concatenated quantized blocks of
``t`` independent codec repetitions through the seeded field-product
hash; every qualified set reproduces the hash input from the public
transcript and its own observations.  The module also carries the
secret-length rule, the exact tiny-instance leakage probe, and the
uniformity statistics used by the trial harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .access import AccessStructure
from .chain import BlockPlan, ChainCodec
from .errors import ParamRangeError, TooLargeForExactError
from .gf2 import FieldSpec, field_for, hash_to_bits
from .info import exact_info, y_group
from .polar import IndexSets, sc_forced_probabilities
from .quantize import make_budget
from .sources import (
    JointSource,
    TestChannel,
    ObservationModel,
    model_side_x,
    model_side_y,
    sample,
)
from .util import bits_to_int, labeled_rng, wilson_interval


@dataclass(frozen=True)
class HashSpec:
    """Seeded two-universal hash: top ``out_bits`` of the field product."""

    field: FieldSpec
    out_bits: int

    def __post_init__(self):
        if not 0 <= self.out_bits <= self.field.degree:
            raise ParamRangeError("output width must lie in [0, field degree]")

    def apply(self, seed: int, value: int) -> int:
        return hash_to_bits(seed, value, self.out_bits, self.field)


def slack_bits(index_sets: IndexSets, blocks: int) -> int:
    """Finite-size deduction per repetition: the per-block unresolved
    dither and almost-determined spans, summed over blocks."""
    n_len = index_sets.block_len
    per_block = index_sets.v_u_given_x.size + (
        (n_len - index_sets.v_u.size) - (n_len - index_sets.h_u.size)
    )
    return blocks * per_block


def secret_length(
    input_bits: int,
    t: int,
    min_h_unqualified: float,
    max_h_qualified: float,
    delta: float,
    slack: float,
) -> int:
    """Extractable bits for ``t`` repetitions of one ``input_bits`` block.

    The per-repetition budget is the entropy advantage of the worst
    qualified set over the best-informed unqualified set, less the
    finite-size slack and a 2*delta security margin per symbol; negative
    budgets clamp to an empty secret.
    """
    per_rep = (
        input_bits * (min_h_unqualified - max_h_qualified)
        - slack
        - 2.0 * delta * input_bits
    )
    return max(0, math.floor(t * per_rep))


@dataclass(frozen=True)
class SecretScheme:
    """Everything needed to run Definition-style sharing trials."""

    source: JointSource
    channel: TestChannel
    structure: AccessStructure
    index_sets: IndexSets
    plan: BlockPlan
    t: int
    hash_spec: HashSpec
    order: tuple = ()
    entropy_terms: dict = dc_field(default_factory=dict)

    @property
    def input_bits(self) -> int:
        return self.plan.total_k * self.index_sets.block_len

    @property
    def secret_bits(self) -> int:
        return self.hash_spec.out_bits


def build_scheme(
    source: JointSource,
    channel: TestChannel,
    structure: AccessStructure,
    index_sets: IndexSets,
    plan: BlockPlan,
    t: int,
    security_delta: float,
    poly_cache=None,
) -> SecretScheme:
    """Fix the hash width from the exact entropy terms and a slack policy."""
    order = tuple(structure.qualified_ordered())
    h_unq = [
        exact_info(source, channel, [f"H(U|{y_group(u)})"])[f"H(U|{y_group(u)})"]
        for u in structure.unqualified_ordered()
    ]
    h_qual = [
        exact_info(source, channel, [f"H(U|{y_group(a)})"])[f"H(U|{y_group(a)})"]
        for a in order
    ]
    min_h_u = min(h_unq) if h_unq else exact_info(source, channel, ["H(U|Y{})"])["H(U|Y{})"]
    max_h_a = max(h_qual)
    input_bits = plan.total_k * index_sets.block_len
    r = secret_length(
        input_bits, t, min_h_u, max_h_a, security_delta,
        slack_bits(index_sets, plan.total_k),
    )
    fld = field_for(max(1, t * input_bits), cache=poly_cache)
    r = min(r, fld.degree)
    return SecretScheme(
        source, channel, structure, index_sets, plan, t,
        HashSpec(fld, r), order,
        {"min_h_unqualified": min_h_u, "max_h_qualified": max_h_a},
    )


@dataclass(frozen=True)
class SecretBundle:
    """One sharing run: the secret, the per-set estimates, and the
    public transcript summary."""

    secret: int
    secret_bits: int
    hash_seed: int
    estimates: dict
    rate_secret: float
    rate_public: float
    trial_meta: dict = dc_field(default_factory=dict)


@dataclass
class ShareReport:
    """Aggregated trial statistics from the batched harness."""

    trials: int
    t: int
    secret_bits: int
    rate_secret: float
    rate_public: float
    secret_errors: dict          # qualified set -> error count
    block_errors: dict           # qualified set -> per-repetition error count
    secrets: list                # per-trial secret values
    bundles: list                # per-trial SecretBundle (without heavy data)
    payload_prefix: np.ndarray | None = None   # first payload bits, per trial
    y_features: dict = dc_field(default_factory=dict)  # unqualified set -> buckets

    def error_rate(self, dec) -> float:
        return self.secret_errors[frozenset(dec)] / self.trials

    def wilson(self, dec, z: float = 1.96):
        return wilson_interval(self.secret_errors[frozenset(dec)], self.trials, z)

    def repetition_error_rate(self, dec) -> float:
        return self.block_errors[frozenset(dec)] / (self.trials * self.t)


def _draw_seed(rng: np.random.Generator, degree: int) -> int:
    while True:
        bits = rng.integers(0, 2, size=degree, dtype=np.uint8)
        val = bits_to_int(bits)
        if val:
            return val


def _side_indices(model: ObservationModel, members, y: np.ndarray) -> np.ndarray:
    """Flat side indices for participant coordinates of ``members``.

    ``y`` has shape (J, ..., N); the result matches the trailing shape.
    """
    coords = [y[m - 1] for m in sorted(members)]
    return model.flatten_side(*coords)


def run_share_trials(scheme: SecretScheme, trials: int, seed: int) -> ShareReport:
    """Run the full pipeline for many independent trials, batched.

    Sampling, encoding and decoding are vectorized across trials and
    repetitions; hashing is per trial.  Estimates are only re-hashed when
    the reconstructed blocks differ from the encoder's (equal inputs give
    equal hashes).
    """
    plan, isets = scheme.plan, scheme.index_sets
    k, n_len, t = plan.total_k, isets.block_len, scheme.t
    order = scheme.order
    codec = ChainCodec(isets, order, plan)
    model_x = model_side_x(scheme.source, scheme.channel)
    models_y = {a: model_side_y(scheme.source, scheme.channel, a) for a in order}

    blocks = sample(scheme.source, n_len, trials * t * k, seed)
    x = np.stack([b.x for b in blocks]).reshape(trials * t, k, n_len)
    y = np.stack([b.y for b in blocks], axis=1).reshape(
        scheme.source.participants, trials * t, k, n_len
    )

    budget = make_budget(isets, k, labeled_rng(seed, "budget-master").integers(1 << 31),
                         batch=(trials * t,))
    q, frame = codec.encode(x, budget, model_x, seed)

    u_bits = q.u.reshape(trials, t * k * n_len)
    rng_seed = labeled_rng(seed, "hash-seed")
    hash_seeds = [_draw_seed(rng_seed, scheme.hash_spec.field.degree) for _ in range(trials)]
    secrets = [scheme.hash_spec.apply(hash_seeds[i], bits_to_int(u_bits[i]))
               for i in range(trials)]

    secret_errors = {a: 0 for a in order}
    block_errors = {a: 0 for a in order}
    estimates_per_trial = [dict() for _ in range(trials)]
    for pos, a in enumerate(order):
        side = _side_indices(models_y[a], a, y)
        u_hat = codec.decode(frame, pos, side, models_y[a])
        rep_bad = (u_hat != q.u).any(axis=(-2, -1)).reshape(trials, t)
        block_errors[a] = int(rep_bad.sum())
        hat_bits = u_hat.reshape(trials, t * k * n_len)
        for i in range(trials):
            if rep_bad[i].any():
                est = scheme.hash_spec.apply(hash_seeds[i], bits_to_int(hat_bits[i]))
            else:
                est = secrets[i]
            estimates_per_trial[i][a] = est
            if est != secrets[i]:
                secret_errors[a] += 1

    input_bits = k * n_len
    rate_secret = scheme.secret_bits / (t * input_bits)
    rate_public = frame.rate
    bundles = [
        SecretBundle(
            secrets[i], scheme.secret_bits, hash_seeds[i], estimates_per_trial[i],
            rate_secret, rate_public, {"trial": i, "seed": seed},
        )
        for i in range(trials)
    ]

    # coarse transcript features for the empirical leakage probe
    pay = frame.payload.reshape(trials, t, -1)[:, 0, :]
    prefix_bits = min(8, pay.shape[-1])
    payload_prefix = (
        np.array([bits_to_int(pay[i, :prefix_bits]) for i in range(trials)])
        if prefix_bits else np.zeros(trials, dtype=int)
    )
    y_features = {}
    for unq in scheme.structure.unqualified_ordered():
        if not unq:
            continue
        members = sorted(unq)
        obs = y[np.array(members) - 1].reshape(len(members), trials, -1)
        frac = obs.mean(axis=(0, 2))
        y_features[unq] = np.clip((frac * 4).astype(int), 0, 3)

    return ShareReport(
        trials, t, scheme.secret_bits, rate_secret, rate_public,
        secret_errors, block_errors, secrets, bundles,
        payload_prefix, y_features,
    )


def share_secret(scheme: SecretScheme, seed: int) -> SecretBundle:
    """One sharing run (Definition-style single execution)."""
    return run_share_trials(scheme, 1, seed).bundles[0]


# ---------------------------------------------------------------------------
# Leakage probes
# ---------------------------------------------------------------------------

def _mutual_information_table(joint: dict) -> float:
    """I(S; W) in bits from a {(s, w): prob} table."""
    total = sum(joint.values())
    ps, pw = {}, {}
    for (s, w), p in joint.items():
        ps[s] = ps.get(s, 0.0) + p
        pw[w] = pw.get(w, 0.0) + p
    mi = 0.0
    for (s, w), p in joint.items():
        if p > 0:
            mi += p * math.log2(p * total / (ps[s] * pw[w]))
    return mi


def leakage_exact_tiny(
    source: JointSource,
    channel: TestChannel,
    index_sets: IndexSets,
    unqualified_member,
    decoder_set,
    r: int,
    field: FieldSpec | None = None,
) -> float:
    """I(secret ; hash seed, transcript, unqualified observations), exactly.

    Enumerates every random object of a one-block, one-repetition
    instance.  Only desk-scale instances are allowed: N <= 2, binary
    side alphabets, r <= 2.
    """
    n_len = index_sets.block_len
    if n_len > 2 or r > 2:
        raise TooLargeForExactError("exact probe limited to N <= 2, r <= 2")
    members = sorted(unqualified_member)
    if any(source.y_sizes[m - 1] != 2 for m in members):
        raise TooLargeForExactError("exact probe needs binary side alphabets")
    fld = field or field_for(n_len)
    if fld.degree != n_len:
        raise TooLargeForExactError("field degree must equal the block length")
    vux = index_sets.v_u_given_x
    msg_idx = index_sets.message_indices(frozenset(decoder_set))
    free = np.setdiff1d(np.arange(n_len), vux)

    # conditional bit probabilities for every (v, x) pair
    from .polar import transform

    all_v = np.array([[ (i >> (n_len - 1 - j)) & 1 for j in range(n_len)]
                      for i in range(2 ** n_len)], dtype=np.uint8)
    model_x = model_side_x(source, channel)
    p_x = source.marginal((0,))
    axes = (0,) + tuple(members)
    p_xy = source.marginal(axes).reshape(2, -1)  # (x, flat y)
    y_card = p_xy.shape[1]

    joint = {}
    for xi in range(2 ** n_len):
        x_bits = np.array([(xi >> (n_len - 1 - j)) & 1 for j in range(n_len)], dtype=np.uint8)
        priors = model_x.priors(x_bits.astype(np.intp))[None, :].repeat(2 ** n_len, axis=0)
        probs = sc_forced_probabilities(priors, all_v)
        p_v_given_x = np.where(all_v == 1, probs, 1 - probs)
        p_x_block = float(np.prod(p_x[x_bits]))
        # per-position unqualified observations given x
        cond_y = p_xy[x_bits] / p_x[x_bits][:, None]      # (N, y_card)
        for r1_int in range(2 ** vux.size):
            r1_bits = np.array([(r1_int >> (vux.size - 1 - j)) & 1
                                for j in range(vux.size)], dtype=np.uint8)
            p_r1 = 2.0 ** (-vux.size)
            for vi in range(2 ** n_len):
                v = all_v[vi]
                if vux.size and not np.array_equal(v[vux], r1_bits):
                    continue
                p_v = float(np.prod(p_v_given_x[vi][free])) if free.size else 1.0
                if p_v == 0.0:
                    continue
                u = transform(v)
                u_int = bits_to_int(u)
                payload = bits_to_int(v[msg_idx])
                for y_flat in range(y_card ** n_len):
                    digits = [(y_flat // y_card ** (n_len - 1 - j)) % y_card
                              for j in range(n_len)]
                    p_y = float(np.prod([cond_y[j, digits[j]] for j in range(n_len)]))
                    if p_y == 0.0:
                        continue
                    base = p_x_block * p_r1 * p_v * p_y
                    for seed in range(1, 2 ** fld.degree):
                        s = hash_to_bits(seed, u_int, r, fld)
                        w = (seed, payload, r1_int, y_flat)
                        key = (s, w)
                        joint[key] = joint.get(key, 0.0) + base / (2 ** fld.degree - 1)
    return _mutual_information_table(joint)


def leakage_empirical(report: ShareReport, y_feature: np.ndarray,
                      payload_prefix: np.ndarray, bootstrap: int = 200,
                      seed: int = 0) -> dict:
    """Plug-in mutual-information estimate over coarse transcript features.

    The features deliberately compress the transcript (an exact plug-in
    over the full observation space is hopeless); the resulting figure is
    a trend statistic, not a certified bound.  Returns the estimate and a
    bootstrap confidence interval.
    """
    n = report.trials
    feats = [
        (int(y_feature[i]), int(payload_prefix[i]))
        for i in range(n)
    ]
    pairs = list(zip(report.secrets, feats))

    def plugin(sample_pairs):
        joint = {}
        for s, w in sample_pairs:
            joint[(s, w)] = joint.get((s, w), 0.0) + 1.0 / len(sample_pairs)
        return _mutual_information_table(joint)

    est = plugin(pairs)
    rng = labeled_rng(seed, "leakage-bootstrap")
    boots = []
    for _ in range(bootstrap):
        idx = rng.integers(0, n, size=n)
        boots.append(plugin([pairs[i] for i in idx]))
    lo, hi = np.percentile(boots, [2.5, 97.5])
    return {"estimate": est, "ci_low": float(lo), "ci_high": float(hi)}


# ---------------------------------------------------------------------------
# Uniformity statistics
# ---------------------------------------------------------------------------

def _regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a, x) (series / continued
    fraction split at x = a + 1)."""
    if x < 0 or a <= 0:
        raise ParamRangeError("invalid incomplete gamma arguments")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        # P(a,x) by series, Q = 1 - P
        term = 1.0 / a
        total = term
        n = a
        for _ in range(500):
            n += 1.0
            term *= x / n
            total += term
            if abs(term) < abs(total) * 1e-15:
                break
        p = total * math.exp(-x + a * math.log(x) - math.lgamma(a))
        return max(0.0, 1.0 - p)
    # continued fraction (Lentz)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def chi_square_sf(stat: float, dof: int) -> float:
    """Survival function of the chi-square distribution."""
    return _regularized_gamma_q(dof / 2.0, stat / 2.0)


def _expected_abs_dev(n: int, p: float) -> float:
    """E|X/n - p| for X ~ Binomial(n, p), exactly (truncated support)."""
    mean = n * p
    sd = math.sqrt(n * p * (1 - p))
    lo = max(0, int(mean - 12 * sd))
    hi = min(n, int(mean + 12 * sd) + 1)
    ks = np.arange(lo, hi + 1)
    logpmf = (
        np.array([math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
                  for k in ks])
        + ks * math.log(p)
        + (n - ks) * math.log1p(-p)
    )
    pmf = np.exp(logpmf)
    return float((pmf * np.abs(ks / n - p)).sum())


def uniformity_report(secrets, r: int, bins_bits: int | None = None) -> dict:
    """Closeness of the empirical secret distribution to uniform.

    Reports the raw total-variation distance of the binned empirical
    distribution, the exact sampling-noise floor an ideally uniform
    source would show at this sample size (raw TV cannot fall below it),
    the debiased distance, and a chi-square goodness-of-fit p-value.
    """
    n = len(secrets)
    if n == 0 or r < 1:
        raise ParamRangeError("need samples and a positive secret width")
    if max(secrets) >> r:
        raise ParamRangeError("secret values wider than the declared width")
    b = r if bins_bits is None else min(bins_bits, r)
    cells = 1 << b
    binned = [s >> (r - b) for s in secrets]
    counts = np.bincount(binned, minlength=cells).astype(float)
    p0 = 1.0 / cells
    tv_raw = 0.5 * float(np.abs(counts / n - p0).sum())
    floor = 0.5 * cells * _expected_abs_dev(n, p0)
    stat = float(((counts - n * p0) ** 2 / (n * p0)).sum())
    return {
        "samples": n,
        "bins_bits": b,
        "tv_raw": tv_raw,
        "tv_noise_floor": floor,
        "tv_debiased": max(0.0, tv_raw - floor),
        "chi2_stat": stat,
        "chi2_pvalue": chi_square_sf(stat, cells - 1),
    }
