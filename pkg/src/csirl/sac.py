"""Soft actor-critic with a pool of independently trained critics.

The actor maps a state to a per-dimension Gaussian ``(mu, log_std)`` over a
pre-squash variable ``u``; actions are ``a = tanh(u)``.  With
``u = mu + sigma * eps`` the log-density of ``a`` is::

    log pi(a|s) = sum_j [ -eps_j^2 / 2 - log_std_j - log(2 pi) / 2 - log(1 - a_j^2) ]

and ``log(1 - tanh(u)^2)`` is evaluated as ``2 (log 2 - u - softplus(-2u))``
so it stays finite when ``|u|`` is large.

Each critic ``i`` is trained on the soft Bellman residual against its own
target network::

    y_i = r + gamma * (1 - done) * (Qhat_i(s', a') - alpha * log pi(a'|s')) + gamma * done * v_term

``v_term`` is the value assigned to a terminal next state (zero unless the
caller models terminals as absorbing).  All critics see the same batch and
the same next action ``a'``, so disagreement inside the pool comes only
from initialization and from the optional randomized priors: with
``prior_scale = beta > 0`` critic ``i`` reports ``f(phi_i) + beta * f(rho_i)``
where ``rho_i`` is a fixed, untrained parameter vector.  The priors keep the
pool disagreeing on states it has never been fitted on.  A pool built from
one parameter vector (and one prior) stays identical forever.

The loss/gradient functions are written with plain numpy operations so they
also run on :class:`~csirl.diffnet.Dual` arguments; the meta-reward module
relies on this to differentiate them a second time.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffnet import Adam, MLPSpec, backward, forward_cache, soft_update
from .diffnet.dual import primal, softplus

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
LOG2 = np.log(2.0)


# ---------------------------------------------------------------------------
# actor
# ---------------------------------------------------------------------------

def actor_heads(spec: MLPSpec, theta, x):
    """Return ``(mu, log_std, free_mask, cache)`` for normalised states ``x``."""
    out, cache = forward_cache(spec, theta, x)
    d = spec.output_dim // 2
    mu = out[..., :d]
    raw = out[..., d:]
    ls = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
    p = primal(raw)
    free = (p > LOG_STD_MIN) & (p < LOG_STD_MAX)
    return mu, ls, free, cache


def squash(mu, ls, eps):
    """``(a, logp, u)`` for noise ``eps``; logp sums over action dims."""
    sigma = np.exp(ls)
    u = mu + sigma * eps
    a = np.tanh(u)
    log1m_a2 = 2.0 * (LOG2 - u - softplus(-2.0 * u))
    logp = (-0.5 * eps * eps - ls - HALF_LOG_2PI - log1m_a2).sum(axis=-1)
    return a, logp, u


@dataclass
class Actor:
    spec: MLPSpec
    params: np.ndarray
    obs_scale: np.ndarray

    @classmethod
    def create(cls, state_dim, action_dim, hidden, rng, obs_scale=None):
        spec = MLPSpec(state_dim, tuple(hidden), 2 * action_dim, "relu")
        scale = np.ones(state_dim) if obs_scale is None else np.asarray(obs_scale, float)
        return cls(spec, spec.init(rng), scale)

    @property
    def action_dim(self):
        return self.spec.output_dim // 2

    def normalise(self, s):
        return np.asarray(s, dtype=np.float64) / self.obs_scale

    def dist(self, s, params=None):
        theta = self.params if params is None else params
        mu, ls, _, _ = actor_heads(self.spec, theta, self.normalise(s))
        return mu, ls

    def mean_action(self, s, params=None):
        return np.tanh(self.dist(s, params)[0])

    def sample_with_noise(self, s, eps, params=None):
        mu, ls = self.dist(s, params)
        a, logp, _ = squash(mu, ls, eps)
        return a, logp

    def sample_action(self, s, rng: np.random.Generator, params=None):
        mu, ls = self.dist(s, params)
        eps = rng.standard_normal(np.shape(mu))
        a, logp, _ = squash(mu, ls, eps)
        return a, logp


def sample_action(actor: Actor, s, rng):
    return actor.sample_action(s, rng)


def mean_action(actor: Actor, s):
    return actor.mean_action(s)


# ---------------------------------------------------------------------------
# critics
# ---------------------------------------------------------------------------

@dataclass
class CriticPool:
    """``n`` critics with target copies and optional randomized priors.

    With ``prior_scale > 0`` each critic is ``Q_i = f(phi_i) + prior_scale * f(rho_i)``
    where ``rho_i`` is a fixed random network of the same shape.  Training
    only moves ``phi_i``; on visited data the trainable part learns to cancel
    its prior, off the data the priors keep the critics apart, which makes
    the pool's disagreement track data coverage.
    """
    spec: MLPSpec
    params: np.ndarray   # (n, P)
    target: np.ndarray   # (n, P)
    obs_scale: np.ndarray
    prior: np.ndarray | None = None
    prior_scale: float = 0.0

    @classmethod
    def create(cls, state_dim, action_dim, hidden, n, rng, obs_scale=None, identical=False,
               prior_scale=0.0):
        spec = MLPSpec(state_dim + action_dim, tuple(hidden), 1, "relu")
        if identical:
            params = np.repeat(spec.init(rng)[None, :], n, axis=0)
        else:
            params = spec.init(rng, n)
        prior = None
        if prior_scale > 0:
            prior = spec.init(rng, n)
            if identical:
                prior = np.repeat(prior[:1], n, axis=0)
        scale = np.ones(state_dim) if obs_scale is None else np.asarray(obs_scale, float)
        return cls(spec, params, params.copy(), scale, prior, float(prior_scale))

    @property
    def n(self):
        return self.params.shape[0]

    def inputs(self, s, a):
        return critic_inputs(s, a, self.obs_scale)

    def prior_q(self, x, k=None):
        """Prior contribution for inputs ``x``: ``(n, B)``, or ``(B,)`` for critic ``k``."""
        if self.prior is None:
            return 0.0
        rho = self.prior if k is None else self.prior[k]
        return self.prior_scale * forward_cache(self.spec, rho, x)[0][..., 0]

    def q(self, s, a, params=None):
        """Q-values of every critic, shape ``(n, B)`` (or ``(n,)`` for one state)."""
        p = self.params if params is None else params
        x = self.inputs(s, a)
        out = forward_cache(self.spec, p, x)[0]
        return out[..., 0] + self.prior_q(x)

    def q_target(self, s, a):
        return self.q(s, a, self.target)


def critic_inputs(s, a, obs_scale):
    return np.concatenate([np.asarray(s, dtype=np.float64) / obs_scale, a], axis=-1)


def soft_value(q_target_i, logp, alpha):
    """V(s') = Qhat_i(s', a') - alpha * log pi(a'|s')."""
    return q_target_i - alpha * logp


def next_values(pool: CriticPool, actor: Actor, s_next, alpha, rng=None, eps=None):
    """Soft values of ``s_next`` under every target critic, shape ``(n, B)``."""
    if eps is None:
        eps = rng.standard_normal((len(s_next), actor.action_dim))
    a2, logp2 = actor.sample_with_noise(s_next, eps)
    return soft_value(pool.q_target(s_next, a2), logp2, alpha)


def critic_loss_grad(spec: MLPSpec, params, x, y):
    """Mean squared Bellman residual per critic and its gradient.

    ``params`` is ``(P,)`` or ``(n, P)``; ``x`` the critic inputs ``(B, in)``;
    ``y`` the regression targets ``(B,)`` or ``(n, B)``.  Returns
    ``(loss, grad, q)`` with ``loss`` of shape ``()`` or ``(n,)``.
    """
    out, cache = forward_cache(spec, params, x)
    q = out[..., 0]
    resid = q - y
    B = q.shape[-1]
    loss = (resid * resid).mean(axis=-1)
    g_out = (2.0 / B) * resid[..., None]
    grad, _ = backward(spec, params, cache, g_out)
    return loss, grad, q


def bellman_targets(r, done, v_next, gamma, v_term=0.0):
    done = np.asarray(done, dtype=np.float64)
    return r + gamma * (1.0 - done) * v_next + gamma * done * v_term


def critic_loss(pool: CriticPool, actor: Actor, batch, rewards, gamma, alpha, rng,
                v_term=0.0, eps=None):
    """Per-critic losses ``(n,)`` and gradients ``(n, P)`` on one batch."""
    s, a, s_next, done = batch
    v_next = next_values(pool, actor, s_next, alpha, rng=rng, eps=eps)
    y = bellman_targets(rewards, done, v_next, gamma, v_term)
    x = pool.inputs(s, a)
    loss, grad, _ = critic_loss_grad(pool.spec, pool.params, x, y - pool.prior_q(x))
    return loss, grad


# ---------------------------------------------------------------------------
# actor objective
# ---------------------------------------------------------------------------

def _q_action_grad(critic_spec, phi, x, action_dim, q_agg, prior=None, prior_scale=0.0):
    """Aggregated Q over the critics in ``phi`` and dQbar/da, for inputs ``x``.

    ``prior`` holds the matching fixed prior network(s), added with weight
    ``prior_scale``.
    """
    out, cache = forward_cache(critic_spec, phi, x)
    q = out[..., 0]
    if prior is not None:
        pout, pcache = forward_cache(critic_spec, prior, x)
        q = q + prior_scale * pout[..., 0]
    if q.ndim == 1:  # single critic
        w = np.ones_like(primal(q))
        qbar = q
    else:
        n = q.shape[0]
        if q_agg == "mean":
            w = np.full(primal(q).shape, 1.0 / n)
        elif q_agg == "min":
            pick = np.argmin(primal(q), axis=0)
            w = np.zeros(primal(q).shape)
            w[pick, np.arange(w.shape[1])] = 1.0
        else:
            raise ValueError(f"unknown q aggregation {q_agg!r}")
        qbar = (q * w).sum(axis=0)
    _, gin = backward(critic_spec, phi, cache, w[..., None], input_grad=True)
    if prior is not None:
        _, pgin = backward(critic_spec, prior, pcache, prior_scale * w[..., None],
                           input_grad=True)
        gin = gin + pgin
    if q.ndim > 1:
        gin = gin.sum(axis=0)
    return qbar, gin[..., -action_dim:]


def actor_loss_grad(actor_spec, theta, critic_spec, phi, xs, eps, alpha, obs_dim,
                    q_agg="mean", prior=None, prior_scale=0.0):
    """Reparameterised actor loss ``mean(alpha logp - Qbar)`` and its theta-gradient.

    ``xs`` are normalised states ``(B, obs_dim)``, ``eps`` fixed noise ``(B, d)``.
    """
    mu, ls, free, cache = actor_heads(actor_spec, theta, xs)
    a, logp, _ = squash(mu, ls, eps)
    d = actor_spec.output_dim // 2
    x_c = np.concatenate([xs, a], axis=-1)
    qbar, dq_da = _q_action_grad(critic_spec, phi, x_c, d, q_agg, prior, prior_scale)
    B = xs.shape[0]
    loss = (alpha * logp - qbar).mean()
    one_m_a2 = 1.0 - a * a
    sigma_eps = np.exp(ls) * eps
    g_u = (alpha * 2.0 * a - dq_da * one_m_a2) / B
    g_mu = g_u
    g_ls = (g_u * sigma_eps - alpha / B) * free
    grad, _ = backward(actor_spec, theta, cache, np.concatenate([g_mu, g_ls], axis=-1))
    return loss, grad


def actor_loss_critic_grad(actor_spec, theta, critic_spec, phi, xs, eps):
    """Gradient of the actor loss with respect to a single critic's params.

    Only the ``-Q(s, a(theta))`` term depends on the critic.
    """
    mu, ls, _, _ = actor_heads(actor_spec, theta, xs)
    a, _, _ = squash(mu, ls, eps)
    x_c = np.concatenate([xs, a], axis=-1)
    out, cache = forward_cache(critic_spec, phi, x_c)
    B = xs.shape[0]
    grad, _ = backward(critic_spec, phi, cache, np.full(primal(out).shape, -1.0 / B))
    return grad


def actor_loss(actor: Actor, pool: CriticPool, states, alpha, rng=None, eps=None,
               q_agg="mean"):
    if eps is None:
        eps = rng.standard_normal((len(states), actor.action_dim))
    return actor_loss_grad(actor.spec, actor.params, pool.spec, pool.params,
                           actor.normalise(states), eps, alpha, len(actor.obs_scale), q_agg,
                           pool.prior, pool.prior_scale)


def update_targets(pool: CriticPool, tau: float = 0.05) -> None:
    soft_update(pool.target, pool.params, tau)


# ---------------------------------------------------------------------------
# agent bundle
# ---------------------------------------------------------------------------

class SACAgent:
    """Actor, critic pool and their Adam optimisers."""

    def __init__(self, state_dim, action_dim, rng, hidden=(256, 256), n_critics=5,
                 obs_scale=None, lr_actor=3e-4, lr_critic=3e-4, gamma=0.99, alpha=0.2,
                 tau=0.05, q_agg="mean", identical_critics=False, prior_scale=0.0):
        self.actor = Actor.create(state_dim, action_dim, hidden, rng, obs_scale)
        self.pool = CriticPool.create(state_dim, action_dim, hidden, n_critics, rng,
                                      obs_scale, identical=identical_critics,
                                      prior_scale=prior_scale)
        self.gamma, self.alpha, self.tau, self.q_agg = gamma, alpha, tau, q_agg
        self.actor_opt = Adam(self.actor.params, lr_actor)
        self.critic_opt = Adam(self.pool.params, lr_critic)

    def update_critics(self, batch, rewards, rng, v_term=0.0):
        """One Adam step on every critic and a target update; the actor is left alone."""
        closs, cgrad = critic_loss(self.pool, self.actor, batch, rewards, self.gamma,
                                   self.alpha, rng, v_term)
        self.critic_opt.step(self.pool.params, cgrad)
        update_targets(self.pool, self.tau)
        return float(np.mean(closs))

    def update(self, batch, rewards, rng, v_term=0.0):
        """One critic step for every pool member, one actor step, target update."""
        closs, cgrad = critic_loss(self.pool, self.actor, batch, rewards, self.gamma,
                                   self.alpha, rng, v_term)
        self.critic_opt.step(self.pool.params, cgrad)
        aloss, agrad = actor_loss(self.actor, self.pool, batch[0], self.alpha, rng=rng,
                                  q_agg=self.q_agg)
        self.actor_opt.step(self.actor.params, agrad)
        update_targets(self.pool, self.tau)
        return float(np.mean(closs)), float(aloss)
