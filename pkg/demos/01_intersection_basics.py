# %% [markdown]
# # Two walkers, one graph
#
# Run two independent copies X and Y of a lazy Markov chain. The intersection
# time tau_I is the first t at which the visited sets {X_0..X_t} and
# {Y_0..Y_t} share a state. This demo computes it exactly on tiny chains,
# samples it, and looks at the intersection count I_t whose mean is Q_t.

# %%
import numpy as np

from intertime import ChainMatrix, make_lazy
from intertime import montecarlo as mc
from intertime.exact import exact_intersection_curve, exact_intersection_expectation
from intertime.families import generate, spec
from intertime.spectral import compute_Qt

# %% [markdown]
# The lazy two-state chain stays put or flips with probability 1/2. From
# (0, 1) the walkers fail to meet in a step only if both stay, which happens
# with probability 1/4, so P(tau_I > t) = 4^-t and E tau_I = 4/3.

# %%
flip = make_lazy(ChainMatrix.from_dense([[0, 1], [1, 0]]))
print("exact E tau_I from (0,1):", exact_intersection_expectation(flip, 0, 1))
print("P(tau_I <= t), t=0..5:   ", np.round(exact_intersection_curve(flip, [1, 0], [0, 1], 5), 4))
est = mc.estimate_tau_I(flip, 0, 1, samples=100_000)
print(f"Monte Carlo:              {est.mean:.4f} +- {est.std_error:.4f}")

# %% [markdown]
# The exact solver walks the product chain of positions and visited sets, so
# it only reaches n <= 5. On the 4-cycle it agrees with sampling for every
# start pair.

# %%
c4 = generate(spec("cycle", n=4))
for y in range(1, 4):
    exact = exact_intersection_expectation(c4, 0, y)
    e = mc.estimate_tau_I(c4, 0, y, samples=50_000)
    print(f"cycle(4) from (0,{y}): exact {exact:.4f}  sampled {e.mean:.4f} +- {e.std_error:.4f}")

# %% [markdown]
# I_t counts index pairs (i, j) with X_i = Y_j. Started together at x, its
# mean equals Q_t, the squared norm of the Green function
# g_t(x, .) = sum_{j <= t} p_j(x, .).

# %%
c16 = generate(spec("cycle", n=16))
for t in (1, 8, 32):
    m = mc.intersection_moments(c16, 0, t, samples=100_000)
    print(f"cycle(16) t={t:>2}: mean I_t {m.mean.mean:8.3f} +- {m.mean.std_error:.3f}   Q_t {m.Qt:8.3f}"
          f"   E I_t^2 / Q_t^2 = {m.second.mean / m.Qt**2:.2f}")
print("Q_8 three ways agree:", compute_Qt(c16, 0, 8))
