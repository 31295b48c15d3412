import numpy as np
import pytest

from cwcancel.hnorm import hinf_norm_discrete
from cwcancel.lifting import (
    InterconnectionError,
    LiftedPlant,
    WellPosednessError,
    closed_loop,
    fast_step_realization,
    lift,
)
from cwcancel.lti import StateSpace, discretize_zoh
from cwcancel.plant import RelayParams, build_hybrid_plant


def open_loop_error_block(lifted):
    """The lifted w -> z block (the closed loop with K = 0)."""
    G = lifted.G
    return StateSpace(G.A, G.B[:, :lifted.n_w], G.C[:lifted.n_z, :],
                      G.D[:lifted.n_z, :lifted.n_w], dt=G.dt)


def test_dimensions(default_lifted):
    assert default_lifted.n_states == 4 + 2 * 16
    assert default_lifted.n_w == 32 and default_lifted.n_z == 32
    assert default_lifted.n_u == 2 and default_lifted.n_y == 2
    D = default_lifted.G.D
    # Strictly proper measurement path: no feedthrough into y at all.
    assert np.all(D[32:, :] == 0.0)


def test_degenerate_lift_is_plain_zoh():
    # N = 1, no delay, no coupling: lifting must coincide with single-step
    # ZOH discretization of the continuous core.
    params = RelayParams(fsfh_ratio=1, delay_seconds=0.0, coupling_gain=0.0)
    plant = build_hybrid_plant(params)
    lifted = lift(plant)
    ref = discretize_zoh(plant.ct_core, params.sampling_period)
    assert np.abs(lifted.G.A - ref.A).max() < 1e-12
    assert np.abs(lifted.G.B - ref.B).max() < 1e-12
    assert np.abs(lifted.G.C - ref.C).max() < 1e-12
    assert np.abs(lifted.G.D - ref.D).max() < 1e-12


def test_open_loop_norm_matches_input_shaping_peak():
    # alpha = 0, K = 0: the lifted error map is the blocked ZOH-discretized
    # 1/(2s+1), whose peak sits at DC and survives discretization exactly.
    for N in (8, 16):
        lifted = lift(build_hybrid_plant(RelayParams(fsfh_ratio=N, coupling_gain=0.0)))
        nrm = hinf_norm_discrete(open_loop_error_block(lifted), tol=1e-8)
        assert abs(nrm - 1.0) < 1e-9


def test_delay_timing():
    # A held control impulse first reaches the relay output one fast step in
    # (strictly proper post filter); its echo must hit the measurement
    # exactly d fast steps after that.
    params = RelayParams(coupling_gain=1.0, carrier_hz=0.0)
    plant = build_hybrid_plant(params)
    Phi, Gw, Gu, Cz, Dzw, Dzu, Cy, Dyw, Dyu = fast_step_realization(plant)
    d = plant.delay_fast_steps
    x = np.zeros(Phi.shape[0])
    u = np.array([1.0, 0.0])
    y_hist, u_out_hist = [], []
    tap, tapD = plant.output_tap, plant.output_tap_feedthrough
    n = plant.ct_core.n_states
    for t in range(3 * d + 4):
        y_hist.append(Cy @ x + Dyu @ u)
        u_out_hist.append(tap @ x[:n] + tapD @ u)
        x = Phi @ x + Gu @ u
    y_hist = np.array(y_hist)
    u_out_hist = np.array(u_out_hist)
    t_u = int(np.argmax(np.abs(u_out_hist).max(axis=1) > 1e-12))
    t_y = int(np.argmax(np.abs(y_hist).max(axis=1) > 1e-12))
    assert t_y - t_u == d


def test_energy_bookkeeping_vs_fast_simulation(default_lifted, default_params):
    # Impulse responses of the lifted recursion over 64 slow steps must match
    # a brute-force fast-rate simulation channel by channel.
    plant = build_hybrid_plant(default_params)
    Phi, Gw, Gu, Cz, Dzw, Dzu, Cy, Dyw, Dyu = fast_step_realization(plant)
    G = default_lifted.G
    N = default_params.fsfh_ratio
    n_slow = 64
    rng = np.random.default_rng(61)
    for _ in range(6):
        ch = int(rng.integers(0, default_lifted.n_w + default_lifted.n_u))
        # lifted propagation
        x = np.zeros(G.n_states)
        z_l = []
        for k in range(n_slow):
            uin = np.zeros(G.n_inputs)
            if k == 0:
                uin[ch] = 1.0
            nz = default_lifted.n_z
            z_l.append(G.C[:nz] @ x + G.D[:nz] @ uin)
            x = G.A @ x + G.B @ uin
        z_l = np.concatenate(z_l)
        # fast-rate brute force
        xf = np.zeros(Phi.shape[0])
        z_f = []
        for k in range(n_slow):
            for j in range(N):
                w = np.zeros(2)
                u = np.zeros(2)
                if k == 0:
                    if ch < 32 and ch // 2 == j:
                        w[ch % 2] = 1.0
                    if ch >= 32:
                        u[ch - 32] = 1.0
                z_f.append(Cz @ xf + Dzw @ w + Dzu @ u)
                xf = Phi @ xf + Gw @ w + Gu @ u
        z_f = np.concatenate(z_f)
        assert np.abs(z_l - z_f).max() < 1e-9
        assert np.linalg.norm(z_l) == pytest.approx(np.linalg.norm(z_f), abs=1e-9)


def test_closed_loop_with_zero_controller(default_lifted):
    K0 = StateSpace(np.zeros((0, 0)), np.zeros((0, 2)), np.zeros((2, 0)),
                    np.zeros((2, 2)), dt=1.0)
    cl = closed_loop(default_lifted, K0)
    ref = open_loop_error_block(default_lifted)
    assert np.abs(cl.A - ref.A).max() == 0.0
    assert np.abs(cl.B - ref.B).max() == 0.0
    assert np.abs(cl.C - ref.C).max() == 0.0
    assert np.abs(cl.D - ref.D).max() == 0.0


def test_closed_loop_dimension(default_lifted, designed_controller):
    cl = closed_loop(default_lifted, designed_controller.K)
    assert cl.n_states == default_lifted.n_states + designed_controller.K.n_states
    assert cl.n_inputs == default_lifted.n_w and cl.n_outputs == default_lifted.n_z


def test_closed_loop_rejects_mismatched_controller(default_lifted):
    bad = StateSpace(np.zeros((1, 1)), np.zeros((1, 3)), np.zeros((2, 1)),
                     np.zeros((2, 3)), dt=1.0)
    with pytest.raises(InterconnectionError):
        closed_loop(default_lifted, bad)
    wrong_step = StateSpace(np.zeros((0, 0)), np.zeros((0, 2)), np.zeros((2, 0)),
                            np.zeros((2, 2)), dt=2.0)
    with pytest.raises(InterconnectionError):
        closed_loop(default_lifted, wrong_step)


def test_closed_loop_algebraic_loop():
    # Force D22 = I and close with D_K = I: the loop I - D22 Dk is singular.
    G = StateSpace(np.zeros((1, 1)), np.zeros((1, 3)), np.zeros((3, 1)),
                   np.block([[np.zeros((2, 2)), np.zeros((2, 1))],
                             [np.zeros((1, 2)), np.eye(1)]]), dt=1.0)
    fake = LiftedPlant(G=G, n_w=2, n_u=1, n_z=2, n_y=1, fsfh_ratio=1, provenance=None)
    K = StateSpace(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), np.eye(1), dt=1.0)
    with pytest.raises(WellPosednessError):
        closed_loop(fake, K)
