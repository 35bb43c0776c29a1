# %% [markdown]
# # Trees, and a graph where transitivity matters
#
# For lazy walks on trees, t_I is comparable to the mixing time, which in
# turn matches the worst expected hitting time of a central node v (a vertex
# whose removal leaves pieces of stationary mass at most 1/2).
#
# Two cliques joined by one edge show what breaks without transitivity:
# t_unif / t_I keeps growing with the size.

# %%
from intertime import central_node
from intertime import montecarlo as mc
from intertime.exact import hitting_times_to, tv_mixing_time
from intertime.families import component_masses, generate, spec
from intertime.spectral import uniform_mixing_time

# %%
print(f"{'tree':<28}{'v':>5}{'max mass':>10}{'t_I':>10}{'max E tau_v':>13}{'t_mix':>8}")
for n, seed in ((40, 1), (80, 2), (160, 3)):
    fs = spec("weighted_tree", n=n, seed=seed)
    c = generate(fs)
    v = central_node(c)
    hit = hitting_times_to(c, v).max()
    tI = mc.estimate_tI(c, 4_000).estimate.mean
    print(f"{fs.id:<28}{v:>5}{max(component_masses(c, v)):>10.3f}{tI:>10.1f}{hit:>13.1f}"
          f"{tv_mixing_time(c):>8}")

# %% [markdown]
# The ratio t_I / max_x E_x tau_v stays of order one (roughly 0.6 to 0.9)
# while n grows by a factor of four, and t_mix tracks t_I closely.

# %%
for m in (16, 64, 256):
    c = generate(spec("two_cliques", m=m))
    tI = mc.estimate_tI(c, 4_000).estimate.mean
    tu = uniform_mixing_time(c)
    print(f"two_cliques(m={m:>3}): t_unif {tu:>7}  t_I {tI:>8.1f}  ratio {tu / tI:6.2f}")
