from .toys import (ToyRecord, gen_two_deltas, gen_two_deltas_records,
                   gen_coin_flip, gen_three_roads, gen_four_node)
from .beam import (BeamSpec, BeamState, BeamTrajectory, sample_beam_spec,
                   beam_energy, beam_positions, solve_beam_step,
                   solve_beam_trajectory, gen_beam_dataset, kkt_residual,
                   projected_hessian_eigmin)
from .allen_cahn import (ACConfig, ACTrajectory, solve_allen_cahn,
                         gen_ac_dataset, sample_ac_config,
                         laplacian_periodic, discrete_lyapunov)

__all__ = [
    "ToyRecord", "gen_two_deltas", "gen_two_deltas_records", "gen_coin_flip",
    "gen_three_roads", "gen_four_node",
    "BeamSpec", "BeamState", "BeamTrajectory", "sample_beam_spec",
    "beam_energy", "beam_positions", "solve_beam_step",
    "solve_beam_trajectory", "gen_beam_dataset", "kkt_residual",
    "projected_hessian_eigmin",
    "ACConfig", "ACTrajectory", "solve_allen_cahn", "gen_ac_dataset",
    "sample_ac_config", "laplacian_periodic", "discrete_lyapunov",
]
