# Fused rollout kernel: per-step policy MLP forward + environment dynamics
# in one C loop. Semantics must match reference.py exactly; the test suite
# compares the two backends step for step.

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fmod, sqrt, tanh

cnp.import_array()

cdef int LINE_WALKER = 0
cdef int POINT_MAZE = 1


cdef void _mlp_forward(const double* flat, const long* dims, int n_layers,
                       const double* x, double* buf_a, double* buf_b) noexcept nogil:
    # buf_a holds the current activation, buf_b the next; result ends in buf_a.
    cdef int layer, i, j
    cdef long fan_in, fan_out
    cdef const double* w
    cdef const double* b
    cdef double acc
    cdef long offset = 0
    for i in range(dims[0]):
        buf_a[i] = x[i]
    for layer in range(n_layers):
        fan_in = dims[layer]
        fan_out = dims[layer + 1]
        w = flat + offset
        b = flat + offset + fan_in * fan_out
        offset += fan_in * fan_out + fan_out
        for j in range(fan_out):
            acc = b[j]
            for i in range(fan_in):
                acc += buf_a[i] * w[i * fan_out + j]
            buf_b[j] = tanh(acc) if layer != n_layers - 1 else acc
        for j in range(fan_out):
            buf_a[j] = buf_b[j]


cdef inline double _clip(double v, double lo, double hi) noexcept nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


def rollout_episode(int kind, double[::1] env_params, double[::1] init_state,
                    object weights, object biases, double[::1] log_std,
                    double[:, ::1] noise, double[::1] act_low, double[::1] act_high):
    """Compiled counterpart of reference.rollout_episode; same contract."""
    cdef int n_layers = len(weights)
    dims_list = [np.asarray(weights[0]).shape[0]] + [np.asarray(w).shape[1] for w in weights]
    cdef cnp.ndarray[long, ndim=1] dims = np.asarray(dims_list, dtype=np.int64)
    parts = []
    for w, b in zip(weights, biases):
        parts.append(np.ascontiguousarray(w, dtype=np.float64).ravel())
        parts.append(np.ascontiguousarray(b, dtype=np.float64).ravel())
    cdef cnp.ndarray[double, ndim=1] flat = np.concatenate(parts)

    cdef int steps = noise.shape[0]
    cdef int act_dim = noise.shape[1]
    cdef int obs_dim = 2 if kind == LINE_WALKER else init_state.shape[0]
    cdef int max_width = int(max(dims_list))
    if obs_dim > max_width:
        max_width = obs_dim

    cdef cnp.ndarray[double, ndim=2] obs_buf = np.empty((steps + 1, obs_dim))
    cdef cnp.ndarray[double, ndim=2] act_buf = np.empty((steps, act_dim))
    cdef cnp.ndarray[double, ndim=1] rew_buf = np.empty(steps)
    cdef cnp.ndarray[double, ndim=1] state = np.array(init_state, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] buf_a = np.empty(max_width)
    cdef cnp.ndarray[double, ndim=1] buf_b = np.empty(max_width)
    cdef cnp.ndarray[double, ndim=1] exec_act = np.empty(act_dim)
    cdef cnp.ndarray[double, ndim=1] std = np.exp(np.asarray(log_std, dtype=np.float64))

    cdef double* st = <double*> state.data
    cdef double* ob = <double*> obs_buf.data
    cdef double* ac = <double*> act_buf.data
    cdef double* rw = <double*> rew_buf.data
    cdef double* pa = <double*> buf_a.data
    cdef double* pb = <double*> buf_b.data
    cdef double* ea = <double*> exec_act.data
    cdef double* sd = <double*> std.data
    cdef const double* fl = <const double*> flat.data
    cdef const long* dm = <const long*> dims.data
    cdef const double* ep = &env_params[0]
    cdef const double* lo = &act_low[0]
    cdef const double* hi = &act_high[0]
    cdef const double* nz = &noise[0, 0]

    cdef int t, j
    cdef double dt, drag, gain, v_max, track_half, vel_scale, speed, x, dx, dy

    with nogil:
        for t in range(steps):
            # observe
            if kind == LINE_WALKER:
                track_half = ep[4]
                vel_scale = ep[5]
                ob[t * obs_dim] = st[0] / track_half
                ob[t * obs_dim + 1] = st[1] / vel_scale
            else:
                for j in range(obs_dim):
                    ob[t * obs_dim + j] = st[j]
            # policy mean + exploration noise
            _mlp_forward(fl, dm, n_layers, ob + t * obs_dim, pa, pb)
            for j in range(act_dim):
                ac[t * act_dim + j] = pa[j] + sd[j] * nz[t * act_dim + j]
                ea[j] = _clip(ac[t * act_dim + j], lo[j], hi[j])
            # advance
            if kind == LINE_WALKER:
                dt = ep[0]
                drag = ep[1]
                gain = ep[2]
                v_max = ep[3]
                track_half = ep[4]
                st[1] += (gain * ea[0] - drag * st[1]) * dt
                x = fmod(st[0] + st[1] * dt + track_half, 2.0 * track_half)
                if x < 0.0:
                    x += 2.0 * track_half
                st[0] = x - track_half
                rw[t] = _clip(st[1], -v_max, v_max)
            else:
                dt = ep[0]
                speed = ep[1]
                st[0] = _clip(st[0] + speed * ea[0] * dt, -1.0, 1.0)
                st[1] = _clip(st[1] + speed * ea[1] * dt, -1.0, 1.0)
                dx = st[0] - st[2]
                dy = st[1] - st[3]
                rw[t] = -sqrt(dx * dx + dy * dy)
        # final observation for bootstrapping
        if kind == LINE_WALKER:
            ob[steps * obs_dim] = st[0] / ep[4]
            ob[steps * obs_dim + 1] = st[1] / ep[5]
        else:
            for j in range(obs_dim):
                ob[steps * obs_dim + j] = st[j]

    return obs_buf, act_buf, rew_buf
