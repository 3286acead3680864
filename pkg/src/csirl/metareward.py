"""Intrinsic reward generator trained through one virtual critic and actor step.

With agent batch ``b``, expert batch ``e`` and one critic ``phi`` from the
pool, the generator parameters ``omega`` act on the meta objective only
through two virtual gradient steps::

    phi'   = phi   - lr1 * grad_phi   L_Q(phi, omega)       (critic step, reward r_m + r_omega)
    theta' = theta - lr2 * grad_theta L_pi(theta, phi')     (actor step against phi')
    L_meta(theta') = mean_e 1/2 ||tanh(mu_theta'(s)) - a||^2

Its gradient is a chain of two vector-Jacobian products, each realised as a
forward-over-reverse mixed partial::

    g  = grad L_meta(theta')
    u  = -lr2 * d/dt grad_phi' L_pi(theta + t g, phi')   at t = 0
    dw = -lr1 * d/dt grad_omega L_Q(phi + t u, omega)    at t = 0

The live actor and critics are never modified; only ``omega`` moves.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffnet import MLPSpec, NumericError, backward, forward_cache, second_order_vjp
from .diffnet.dual import primal
from .sac import actor_heads, actor_loss_critic_grad, actor_loss_grad, bellman_targets, \
    critic_loss_grad


@dataclass
class RewardGenerator:
    spec: MLPSpec
    params: np.ndarray
    obs_scale: np.ndarray
    c_r: float = 1.0

    @classmethod
    def create(cls, state_dim, action_dim, h_dim, hidden, rng, obs_scale=None, c_r=1.0):
        spec = MLPSpec(state_dim + action_dim + h_dim, tuple(hidden), 1, "relu")
        scale = np.ones(state_dim) if obs_scale is None else np.asarray(obs_scale, float)
        return cls(spec, spec.init(rng), scale, float(c_r))

    def inputs(self, s, a, hg):
        s = np.atleast_2d(np.asarray(s, dtype=np.float64))
        a = np.atleast_2d(a)
        hg = np.broadcast_to(np.asarray(hg, dtype=np.float64), (len(s), np.shape(hg)[-1]))
        return np.concatenate([s / self.obs_scale, a, hg], axis=-1)


def generator_reward(spec, omega, x, c_r):
    """``c_r * tanh(net(x))`` and the cache needed for its gradient."""
    out, cache = forward_cache(spec, omega, x)
    t = np.tanh(out[..., 0])
    return c_r * t, t, cache


def intrinsic_reward(gen: RewardGenerator, s, a, hg, params=None):
    omega = gen.params if params is None else params
    r, _, _ = generator_reward(gen.spec, omega, gen.inputs(s, a, hg), gen.c_r)
    return r


def combined_reward(r_m, gen: RewardGenerator, s, a, hg):
    """Matching reward plus intrinsic reward."""
    return np.asarray(r_m) + intrinsic_reward(gen, s, a, hg)


def meta_loss_grad(actor_spec, theta, xe, ae, eps=None):
    """BC loss ``mean_b 1/2 sum_j (ahat - a)^2`` and its gradient in ``theta``.

    ``ahat = tanh(mu)`` unless noise ``eps`` is given, in which case the
    reparameterised sample ``tanh(mu + sigma * eps)`` is used.
    """
    ae = np.asarray(ae, dtype=np.float64)
    if len(ae) == 0:
        raise ValueError("meta loss needs a non-empty expert batch")
    mu, ls, free, cache = actor_heads(actor_spec, theta, xe)
    u = mu if eps is None else mu + np.exp(ls) * eps
    ahat = np.tanh(u)
    diff = ahat - ae
    B = len(ae)
    loss = 0.5 * (diff * diff).sum(axis=-1).mean()
    g_u = diff * (1.0 - ahat * ahat) / B
    g_ls = np.zeros_like(primal(g_u)) if eps is None else g_u * np.exp(ls) * eps * free
    grad, _ = backward(actor_spec, theta, cache, np.concatenate([g_u, g_ls], axis=-1))
    return loss, grad


def meta_loss(actor, states, actions, eps=None):
    return float(meta_loss_grad(actor.spec, actor.params, actor.normalise(states), actions, eps)[0])


@dataclass
class MetaProblem:
    """Everything the hypergradient needs, frozen for one update.

    Agent batch: critic inputs ``x_c``, generator inputs ``x_g``, critic-free
    reward part ``r_m``, done flags and the next-state soft values ``v_next``
    (from the critic's own target network) plus terminal values ``v_term``.
    Actor step: normalised states ``xs`` and noise ``eps_pi``.  Meta loss:
    normalised expert states ``xe`` and actions ``ae``.
    """
    actor_spec: MLPSpec
    critic_spec: MLPSpec
    gen_spec: MLPSpec
    theta: np.ndarray
    phi: np.ndarray
    x_c: np.ndarray
    x_g: np.ndarray
    r_m: np.ndarray
    done: np.ndarray
    v_next: np.ndarray
    xs: np.ndarray
    eps_pi: np.ndarray
    xe: np.ndarray
    ae: np.ndarray
    v_term: np.ndarray | float = 0.0
    eps_meta: np.ndarray | None = None
    gamma: float = 0.99
    alpha: float = 0.2
    c_r: float = 1.0
    lr1: float = 1e-3
    lr2: float = 1e-3
    q_agg: str = field(default="mean")
    prior: np.ndarray | None = None
    prior_scale: float = 0.0
    prior_c: np.ndarray | float = 0.0

    def critic_q(self, phi):
        out, _ = forward_cache(self.critic_spec, phi, self.x_c)
        return out[..., 0] + self.prior_c

    def targets(self, omega):
        r_w, _, _ = generator_reward(self.gen_spec, omega, self.x_g, self.c_r)
        return bellman_targets(self.r_m + r_w, self.done, self.v_next, self.gamma, self.v_term)

    def critic_grad_phi(self, phi, omega):
        return critic_loss_grad(self.critic_spec, phi, self.x_c,
                                self.targets(omega) - self.prior_c)[1]

    def critic_grad_omega(self, phi, omega):
        q = self.critic_q(phi)
        _, t, gcache = generator_reward(self.gen_spec, omega, self.x_g, self.c_r)
        y = bellman_targets(self.r_m + self.c_r * t, self.done, self.v_next, self.gamma,
                            self.v_term)
        B = len(self.r_m)
        dl_dr = -2.0 * (q - y) / B
        g_out = (dl_dr * self.c_r * (1.0 - t * t))[..., None]
        return backward(self.gen_spec, omega, gcache, g_out)[0]

    def actor_grad_theta(self, theta, phi):
        return actor_loss_grad(self.actor_spec, theta, self.critic_spec, phi, self.xs,
                               self.eps_pi, self.alpha, self.xs.shape[-1], self.q_agg,
                               self.prior, self.prior_scale)[1]

    def actor_grad_phi(self, theta, phi):
        return actor_loss_critic_grad(self.actor_spec, theta, self.critic_spec, phi,
                                      self.xs, self.eps_pi)

    def inner(self, omega):
        phi2 = self.phi - self.lr1 * self.critic_grad_phi(self.phi, omega)
        theta2 = self.theta - self.lr2 * self.actor_grad_theta(self.theta, phi2)
        return phi2, theta2

    def composite(self, omega) -> float:
        """``omega -> L_meta(theta'(phi'(omega)))``, the map being differentiated."""
        _, theta2 = self.inner(omega)
        return float(meta_loss_grad(self.actor_spec, theta2, self.xe, self.ae, self.eps_meta)[0])

    def hypergradient(self, omega):
        """Return ``(L_meta(theta'), d L_meta / d omega, diagnostics)``."""
        phi2, theta2 = self.inner(omega)
        lmeta, g = meta_loss_grad(self.actor_spec, theta2, self.xe, self.ae, self.eps_meta)
        u = -self.lr2 * second_order_vjp(self.actor_grad_phi, self.theta, phi2, g)
        hg = -self.lr1 * second_order_vjp(self.critic_grad_omega, self.phi, omega, u)
        diag = {"meta_loss": float(lmeta), "norm_dmeta_dtheta": float(np.linalg.norm(g)),
                "norm_dmeta_dphi": float(np.linalg.norm(u)),
                "norm_dmeta_domega": float(np.linalg.norm(hg))}
        if not all(np.isfinite(v) for v in diag.values()):
            raise NumericError(f"non-finite hypergradient: {diag}")
        return float(lmeta), hg, diag


def build_problem(agent, k: int, gen: RewardGenerator, batch, r_m, hg, expert, rng,
                  v_term=0.0, lr1=1e-3, lr2=1e-3, sample_meta=False) -> MetaProblem:
    """Freeze one hypergradient problem from live networks (copies, no mutation)."""
    s, a, s_next, done = batch
    actor, pool = agent.actor, agent.pool
    B, d = len(s), actor.action_dim
    eps_next = rng.standard_normal((B, d))
    a2, logp2 = actor.sample_with_noise(s_next, eps_next)
    x2 = pool.inputs(s_next, a2)
    q2 = forward_cache(pool.spec, pool.target[k], x2)[0][..., 0] + pool.prior_q(x2, k)
    v_next = q2 - agent.alpha * logp2
    x_c = pool.inputs(s, a)
    eps_pi = rng.standard_normal((B, d))
    es, ea = expert
    eps_meta = rng.standard_normal((len(es), d)) if sample_meta else None
    return MetaProblem(
        actor_spec=actor.spec, critic_spec=pool.spec, gen_spec=gen.spec,
        theta=actor.params.copy(), phi=pool.params[k].copy(),
        x_c=x_c, x_g=gen.inputs(s, a, hg), r_m=np.asarray(r_m, float),
        done=np.asarray(done, float), v_next=v_next, v_term=v_term,
        xs=actor.normalise(s), eps_pi=eps_pi, xe=actor.normalise(es),
        ae=np.asarray(ea, float), eps_meta=eps_meta, gamma=agent.gamma, alpha=agent.alpha,
        c_r=gen.c_r, lr1=lr1, lr2=lr2, q_agg=agent.q_agg,
        prior=None if pool.prior is None else pool.prior[k], prior_scale=pool.prior_scale,
        prior_c=pool.prior_q(x_c, k))


def meta_update(gen: RewardGenerator, problem: MetaProblem, lr3: float = 0.01, optimizer=None):
    """One outer step on ``omega``.

    Without an optimizer this is plain gradient descent and returns a new
    array, leaving ``gen.params`` alone.  With an :class:`~csirl.diffnet.Adam`
    the generator's params are stepped in place and returned.
    """
    _, hg, diag = problem.hypergradient(gen.params)
    if optimizer is None:
        return gen.params - lr3 * hg, diag
    optimizer.step(gen.params, hg)
    return gen.params, diag
