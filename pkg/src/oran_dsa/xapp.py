"""DSA xApp: interference graph, PRB coloring and fairness engines.

Runs behind any transport. Lock-step protocol: one ``e2_setup`` per
connection, one ``a1_policy`` per rApp episode, then for every slot an
``e2_report`` answered by exactly one ``e2_control``.
"""

from __future__ import annotations

import numpy as np

from oran_dsa import coloring, fairness
from oran_dsa.control_plane import (
    A1Policy,
    CodecError,
    E2Control,
    E2Report,
    E2Setup,
    LineHandler,
    Message,
    decode,
    encode,
)
from oran_dsa.graph import UeState, build_graph
from oran_dsa.radio import (
    Assignment,
    LinkSet,
    SpectrumGrid,
    activity_matrix,
    candidate_rates,
    noise_power,
)
from oran_dsa.streams import COLORING, stream


class XApp(LineHandler):
    def __init__(self):
        self.setup: E2Setup | None = None
        self.policy = None
        self.grid: SpectrumGrid | None = None
        self.noise_w = 0.0
        self.state: fairness.FairnessState | None = None

    def handle_line(self, line: bytes) -> list[bytes]:
        return [encode(m) for m in self.handle(decode(line))]

    def handle(self, msg: Message) -> list[Message]:
        if isinstance(msg, E2Setup):
            self.setup = msg
            self.state = fairness.FairnessState(alpha=msg.ewma_alpha)
            return []
        if self.setup is None:
            raise CodecError(f"{msg.TYPE} received before e2_setup")
        if isinstance(msg, A1Policy):
            self._integrate_policy(msg)
            return []
        if isinstance(msg, E2Report):
            return [self.on_report(msg)]
        raise CodecError(f"xApp does not accept {msg.TYPE} messages")

    def _integrate_policy(self, msg: A1Policy) -> None:
        self.policy = msg.policy
        self.grid = SpectrumGrid(self.setup.bandwidth_hz, self.setup.guard_band_hz, msg.policy.numerology)
        self.noise_w = noise_power(self.setup.noise_psd_dbm_hz, self.grid.prb_bandwidth_hz)
        # UE identities are scoped to an episode
        self.state.reset()

    def on_report(self, report: E2Report) -> E2Control:
        policy = self.policy
        if policy is None or report.episode_id != policy.episode_id:
            raise CodecError(f"e2_report for episode {report.episode_id} without a matching A1 policy")
        grid = self.grid
        state = self.state
        n_prbs = grid.prb_count

        if report.feedback:
            state.update(dict(report.feedback))
        for u in report.ues:
            state.admit(u.ue_id, u.demand_bps)

        ue_ids = tuple(u.ue_id for u in report.ues)
        serving = {u.ue_id: u.ru_id for u in report.ues}
        pathloss = np.asarray(report.pathloss, dtype=float).reshape(len(ue_ids), len(self.setup.rus))
        fading = np.asarray(report.fading, dtype=float).reshape(len(ue_ids), len(self.setup.rus), n_prbs)
        links = LinkSet(ue_ids, tuple(self.setup.rus), np.full(pathloss.shape, np.nan), pathloss, fading)

        ues = [
            UeState(
                u.ue_id,
                u.ru_id,
                u.demand_bps,
                policy.ue_tolerances.get(u.ue_id, 0.0),
                policy.ue_weights.get(u.ue_id, 1.0),
            )
            for u in report.ues
        ]
        weights = {u.id: u.weight for u in ues}
        g = build_graph(ues, links, grid, self.noise_w)
        rng = stream(self.setup.seed, COLORING, report.episode_id, report.slot_id)
        colored = coloring.color(g, n_prbs, weights, policy.coloring_scheme, rng)

        active = activity_matrix(Assignment(serving, dict(colored.colors)), links, n_prbs)
        table = candidate_rates(links, serving, active, grid, self.noise_w)
        rates = {u: table[i] for i, u in enumerate(ue_ids)}

        result = fairness.schedule(
            policy.fairness_scheme, colored, g, state, rates, weights, serving, n_prbs
        )
        state.mark_served(result.assignment, report.slot_id)
        return E2Control(
            episode_id=report.episode_id,
            slot_id=report.slot_id,
            assignment=dict(result.assignment.prb),
            occupancy=result.assignment.occupancy(),
            conflicts=g.edges,
            colored=len(colored.colors),
            uncolored=len(colored.uncolored),
            preempted=list(result.preempted),
        )
