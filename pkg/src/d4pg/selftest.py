"""Fast self-contained sanity suite behind `d4pg selftest`.

Each check recomputes its expected values from first principles (direct
double sums, finite differences, brute-force recursions) rather than
trusting the library code under test. Runs in a few seconds.
"""

from __future__ import annotations

import time

import numpy as np

from . import distributions as dist
from .envs import soft_indicator
from .learner import LearnerConfig, actor_step, build_networks, make_optimizers
from .nn import AdamState, NetSpec, adam_update, forward, init_net
from .replay import NStepAccumulator, SumTree, SampledBatch
from .transport import decode_frame, encode_frame
from .errors import ChecksumError


def _projection_direct(target_atoms, target_probs, support):
    """Double sum over the piecewise-linear hat function on the atom grid."""
    z = support.atoms
    delta = support.delta
    out = np.zeros(len(z))
    for zj, pj in zip(target_atoms, target_probs):
        zc = min(max(zj, support.v_min), support.v_max)
        for i, zi in enumerate(z):
            w = 1.0 - abs(zc - zi) / delta
            if w > 0.0:
                out[i] += pj * w
    return out


def check_projection(rng) -> str:
    worst = 0.0
    for _ in range(100):
        ell = int(rng.integers(2, 32))
        v_min = float(rng.uniform(-10, 0))
        v_max = v_min + float(rng.uniform(1, 20))
        support = dist.make_support(ell, v_min, v_max)
        k = int(rng.integers(1, 40))
        atoms = rng.uniform(v_min - 5, v_max + 5, size=k)
        probs = rng.dirichlet(np.ones(k))
        got = dist.project_categorical(atoms, probs, support)
        want = _projection_direct(atoms, probs, support)
        worst = max(worst, float(np.abs(got - want).max()),
                    abs(float(got.sum()) - 1.0))
    if worst > 1e-12:
        raise AssertionError(f"projection deviates from direct sum by {worst:.3e}")
    return f"max deviation {worst:.1e}"


def check_cross_entropy_grad(rng) -> str:
    worst = 0.0
    for _ in range(10):
        n = int(rng.integers(2, 12))
        logits = rng.normal(0, 2, size=n)
        target = rng.dirichlet(np.ones(n))
        _, grad = dist.categorical_cross_entropy(target, logits)
        h = 1e-6
        for i in range(n):
            bumped = logits.copy()
            bumped[i] += h
            lo = logits.copy()
            lo[i] -= h
            fd = (dist.categorical_cross_entropy(target, bumped)[0]
                  - dist.categorical_cross_entropy(target, lo)[0]) / (2 * h)
            rel = abs(grad[i] - fd) / max(1.0, abs(grad[i]), abs(fd))
            worst = max(worst, float(rel))
    if worst > 1e-5:
        raise AssertionError(f"cross-entropy grad off by rel {worst:.3e}")
    return f"max rel err {worst:.1e}"


def check_nstep(rng) -> str:
    for n in (1, 3, 5):
        gamma = 0.9
        acc = NStepAccumulator(n, gamma)
        steps = []
        out = []
        for i in range(17):
            x = rng.normal(size=2)
            a = rng.normal(size=1)
            r = float(rng.uniform(0, 1))
            x_next = rng.normal(size=2)
            terminal = i == 16
            steps.append((x, a, r, x_next, terminal))
            out.extend(acc.push(x, a, r, x_next, terminal))
        for i, tr in enumerate(out):
            total = 0.0
            g = 1.0
            for j in range(i, min(i + n, len(steps))):
                total += g * steps[j][2]
                g *= gamma
            if total != tr.cumulative_reward:
                raise AssertionError(f"N={n} reward sum mismatch at {i}")
    return "bit-exact for N in {1,3,5}"


def check_sumtree(rng) -> str:
    tree = SumTree(64)
    values = np.zeros(64)
    for _ in range(500):
        idx = rng.integers(0, 64, size=rng.integers(1, 8))
        vals = rng.uniform(0.01, 5.0, size=len(idx))
        tree.set_leaves(idx, vals)
        values[idx] = vals
    err = abs(tree.total() - values.sum())
    if err > 1e-9:
        raise AssertionError(f"root drifted from leaf sum by {err:.3e}")
    return f"root drift {err:.1e}"


def check_frame_roundtrip(rng) -> str:
    spec = NetSpec((3, 8, 2), output_activation="tanh")
    net = init_net(spec, 5)
    frame = encode_frame(net, version=9)
    version, layers = decode_frame(frame)
    ok = version == 9 and all(
        np.array_equal(w, net.weights[i]) and np.array_equal(b, net.biases[i])
        for i, (w, b) in enumerate(layers))
    if not ok:
        raise AssertionError("frame round trip altered parameters")
    corrupted = bytearray(frame)
    corrupted[len(frame) // 2] ^= 0xFF
    try:
        decode_frame(bytes(corrupted))
    except ChecksumError:
        return "round trip exact, corruption detected"
    raise AssertionError("corrupted frame slipped past the checksum")


def check_adam_first_step(rng) -> str:
    spec = NetSpec((2, 2))
    net = init_net(spec, 1)
    before = net.weights[0].copy()
    state = AdamState.for_net(net)
    x = rng.normal(size=(4, 2))
    out, cache = forward(net, x)
    from .nn import backward
    grads = backward(net, cache, np.ones_like(out))
    adam_update(net, grads, state, lr=1e-3)
    step = np.abs(net.weights[0] - before)
    if not np.allclose(step, 1e-3, atol=1e-6):
        raise AssertionError(f"first Adam step magnitude {step.max():.2e} != lr")
    return "first-step magnitude equals lr"


def check_actor_chain(rng) -> str:
    cfg = LearnerConfig(batch_size=4, head_kind=dist.HEAD_CATEGORICAL,
                        num_atoms=11, v_min=-1.0, v_max=1.0)
    nets = build_networks(3, 2, np.ones(2), cfg, actor_hidden=(8,), critic_hidden=(8,),
                          actor_seed=2, critic_seed=3)
    opt = make_optimizers(nets)
    critic_before = [w.copy() for w in nets.critic.weights]

    from .replay import Transition
    batch = SampledBatch(
        transitions=[Transition(rng.normal(size=3), rng.normal(size=2), 0.0,
                                np.zeros(3), 0.0) for _ in range(4)],
        indices=np.arange(4), probabilities=np.full(4, 0.25),
        weights=np.ones(4), generations=np.arange(4))
    actor_step(batch, nets, cfg, opt)
    for before, after in zip(critic_before, nets.critic.weights):
        if not np.array_equal(before, after):
            raise AssertionError("actor step modified critic parameters")
    return "critic untouched by actor step"


def check_soft_indicator() -> str:
    if soft_indicator(0.02, 0.05, 0.2) != 1.0:
        raise AssertionError("indicator not 1 inside the tolerance band")
    v = soft_indicator(0.2, 0.0, 0.2)
    if abs(v - 0.05) > 1e-12:
        raise AssertionError(f"indicator at the margin is {v}, expected 0.05")
    return "boundary values match"


CHECKS = (
    ("categorical projection vs direct sum", check_projection),
    ("cross-entropy gradient vs finite differences", check_cross_entropy_grad),
    ("n-step sums vs brute force", check_nstep),
    ("sum-tree root consistency", check_sumtree),
    ("parameter frame round trip", check_frame_roundtrip),
    ("adam first-step magnitude", check_adam_first_step),
    ("actor step isolation", check_actor_chain),
    ("soft indicator boundaries", check_soft_indicator),
)


def run_selftest(seed: int = 0) -> bool:
    rng = np.random.default_rng(seed)
    all_ok = True
    for name, fn in CHECKS:
        started = time.perf_counter()
        try:
            detail = fn(rng) if fn.__code__.co_argcount else fn()
            elapsed = time.perf_counter() - started
            print(f"ok   {name}: {detail} ({elapsed:.2f}s)")
        except AssertionError as exc:
            all_ok = False
            print(f"FAIL {name}: {exc}")
    return all_ok
