"""
Experiment orchestration: builds seeded trials, runs them on the trial runner,
aggregates traces and writes CSV tables plus a manifest.
"""
import logging
import platform
from dataclasses import dataclass, field
from importlib import metadata
from math import log, sqrt
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from src.domain.entities.convergence_trace import ConvergenceTrace
from src.domain.entities.measurement_model import EnsembleKind
from src.domain.entities.signal_instance import SignalInstance
from src.domain.ports.image_source_port import ImageSourcePort
from src.domain.ports.result_exporter_port import ResultExporterPort
from src.domain.value_objects.constraint_set import ConstraintSet
from src.domain.value_objects.estimates import BoundParameters, ConeDescriptor
from src.domain.value_objects.inexact_operator import InexactOperator
from src.domain.value_objects.solver_config import Algorithm
from src.domain.value_objects.transform import Transform
from src.shared.config.settings import get_settings
from src.shared.exceptions import (
    ApplicationException,
    ConfigurationException,
    ErrorCode,
    ParameterException,
)
from src.shared.trial_runner import TrialRunner, derive_seed
from src.shared.utils.timing_decorator import timed

from .bound_service import bound_curve
from .experiment_config import (
    BoundCheckParams,
    ExperimentConfig,
    ExperimentName,
    ListaParams,
    SideInfoParams,
    SpectralCsParams,
    TreeParams,
    WidthTableParams,
)
from .geometry_service import (
    mean_width_monte_carlo,
    rho_brute_force,
    sparse_width_scale,
    statistical_dimension_l1,
    tree_width_scale,
)
from .inexact_projection_service import (
    mask_epsilon_upper_bound,
    measure_epsilon,
    oracle_energy_subset,
    ranked_coefficients,
)
from .network_service import forward_batch, layer_objectives, sample_objectives
from .signal_service import (
    make_clustered_sparse_signal,
    make_measurements,
    make_patch_signal,
    make_sparse_codes,
    make_tree_signal,
)
from .solver_service import default_step_size, run_ipgd, run_pgd, solver_config
from .trace_aggregation import AGGREGATE_COLUMNS, RAW_COLUMNS, aggregate_traces
from .training_service import (
    default_network,
    normalized_gaussian_matrix,
    reference_ista,
    synthetic_dataset,
    train,
    train_mixture,
)

logger = logging.getLogger(__name__)

ImageSourceFactory = Callable[[SideInfoParams], ImageSourcePort]

MANIFEST_FILE = "manifest.json"
VERSIONED_PACKAGES = ("ipgd-lab", "numpy", "scipy", "polars", "pydantic")


@dataclass
class ExperimentResult:
    """Files written by one experiment run and its headline numbers."""
    name: str
    output_dir: Path
    files: Dict[str, Path] = field(default_factory=dict)
    summary: Dict[str, object] = field(default_factory=dict)
    manifest: Dict[str, object] = field(default_factory=dict)


class ExperimentService:
    """Runs named experiments and writes their artifacts through the exporter port."""

    def __init__(
        self,
        exporter: ResultExporterPort,
        runner: Optional[TrialRunner] = None,
        image_source_factory: Optional[ImageSourceFactory] = None,
    ):
        self.exporter = exporter
        self.runner = runner or TrialRunner()
        self.image_source_factory = image_source_factory

    @timed
    def run(self, config: ExperimentConfig, output_dir: Optional[Path] = None) -> ExperimentResult:
        """
        Run the experiment named in `config` and write its files.

        Args:
            config: Complete experiment document
            output_dir: Destination; defaults to OUTPUT_ROOT_DIR/<name>

        Returns:
            ExperimentResult listing every file written

        Raises:
            ApplicationException: Any failure, with the original error as cause
        """
        output_dir = Path(output_dir or get_settings().OUTPUT_ROOT_DIR / config.name.value)
        result = ExperimentResult(name=config.name.value, output_dir=output_dir)
        runners = {
            ExperimentName.TREE: self._run_tree,
            ExperimentName.SPECTRAL_CS: self._run_spectral_cs,
            ExperimentName.SIDE_INFO: self._run_side_info,
            ExperimentName.BOUND_CHECK: self._run_bound_check,
            ExperimentName.WIDTH_TABLE: self._run_width_table,
            ExperimentName.LISTA_MM: self._run_lista_mm,
        }
        logger.info(f"Running experiment {config.name.value} (seed {config.seed}) into {output_dir}")
        try:
            peak_memory = runners[config.name](config, result)
            self._write_manifest(config, result, peak_memory)
        except ApplicationException:
            raise
        except Exception as e:
            logger.error(f"Experiment {config.name.value} failed: {str(e)}", exc_info=True)
            raise ApplicationException(
                f"Experiment {config.name.value} failed: {str(e)}",
                error_code=ErrorCode.INTERNAL_ERROR,
                context={"experiment": config.name.value},
                cause=e,
            )
        logger.info(f"Experiment {config.name.value} wrote {len(result.files)} files")
        return result

    # Tree-structured sparsity

    def _run_tree(self, config: ExperimentConfig, result: ExperimentResult) -> float:
        params: TreeParams = config.tree
        d = (1 << params.levels) - 1
        if params.k > d:
            raise ParameterException("Tree sparsity exceeds the tree size", parameter="tree.k", value=params.k)

        def trial(index: int, seed: int) -> Dict[str, ConvergenceTrace]:
            signal = make_tree_signal(params.levels, params.k, params.top_levels, params.sigma_top,
                                      params.sigma_rest, derive_seed(seed, 0))
            model = make_measurements(signal, EnsembleKind.IID_GAUSSIAN, derive_seed(seed, 1),
                                      noise_sigma=params.noise_sigma, m=params.m)
            mu = default_step_size(model, params.step_policy)
            sparse = ConstraintSet.k_sparse(d, params.k)
            common = dict(step_size=mu, max_iterations=params.iterations, store_every=params.iterations)
            traces = {
                "iht": run_pgd(model, solver_config(Algorithm.PGD, constraint=sparse, label="iht", **common)),
                "mbiht": run_pgd(model, solver_config(Algorithm.PGD, constraint=ConstraintSet.tree_sparse(d, params.k),
                                                      label="mbiht", **common)),
            }
            for levels in params.truncation_levels:
                label = f"ipgd_l{levels}"
                traces[label] = run_ipgd(model, solver_config(
                    Algorithm.IPGD, constraint=sparse, inexact=InexactOperator.level_truncation(levels),
                    label=label, **common))
            schedule = InexactOperator.growing_levels(params.schedule_start, params.levels, params.schedule_every)
            traces["scheduled"] = run_ipgd(model, solver_config(
                Algorithm.IPGD, constraint=sparse, inexact=schedule, label="scheduled", **common))
            return traces

        batch = self.runner.run(trial, config.resolved_trials, config.seed, label="tree")
        converged = self._export_tree_trials(batch.results, params.convergence_tolerance, result)
        self._export_traces(batch.results, result, selected=converged or list(range(len(batch.results))))
        if not converged:
            logger.warning("Model-based IHT converged in none of the trials, aggregating all of them")
        result.summary["converged_trials"] = converged
        result.summary["convergence_tolerance"] = params.convergence_tolerance
        return batch.memory_peak_mb

    def _export_tree_trials(self, trials: List[Dict[str, ConvergenceTrace]], tolerance: Optional[float],
                            result: ExperimentResult) -> List[int]:
        """Per-trial final relative errors; returns the trials where model-based IHT converged."""
        labels = list(trials[0])
        rows = []
        for index, traces in enumerate(trials):
            finals = {label: float(traces[label].relative_errors()[-1]) for label in labels}
            rows.append({"trial": index, "converged": tolerance is None or finals["mbiht"] <= tolerance, **finals})
        self._export(result, "tree_trials.csv", rows, ["trial", "converged", *labels])
        converged = [row["trial"] for row in rows if row["converged"]]
        logger.info(f"Model-based IHT converged in {len(converged)} of {len(trials)} trials")
        return converged

    # Clustered sparsity in a redundant dictionary

    def _run_spectral_cs(self, config: ExperimentConfig, result: ExperimentResult) -> float:
        params: SpectralCsParams = config.spectral_cs
        settings_grid = [(r, k, offset) for r, k in zip(params.redundancies, params.sparsities)
                         for offset in params.offsets]

        def trial(index: int, seed: int) -> Dict[str, ConvergenceTrace]:
            traces = {}
            for case, (r, k, offset) in enumerate(settings_grid):
                n = params.fixed_dimension // r if params.fixed_dimension else params.n
                signal = make_clustered_sparse_signal(r * n, k, params.min_spacing, [offset, -offset],
                                                      params.sigma_neighbor, derive_seed(seed, case))
                model = make_measurements(signal, EnsembleKind.REDUNDANT_DCT, derive_seed(seed, case),
                                          redundancy=r)
                ball = ConstraintSet.l1_ball(signal.d, float(np.abs(signal.x).sum()))
                common = dict(step_size=default_step_size(model, params.step_policy),
                              max_iterations=params.iterations, store_every=params.iterations, constraint=ball)
                suffix = f"r{r}_o{offset}"
                traces[f"pgd_{suffix}"] = run_pgd(model, solver_config(Algorithm.PGD, label=f"pgd_{suffix}",
                                                                       **common))
                traces[f"ipgd_{suffix}"] = run_ipgd(model, solver_config(
                    Algorithm.IPGD, inexact=InexactOperator.neighborhood_dominant(params.window),
                    label=f"ipgd_{suffix}", **common))
            return traces

        batch = self.runner.run(trial, config.resolved_trials, config.seed, label="spectral-cs")
        self._export_traces(batch.results, result)
        return batch.memory_peak_mb

    # Side information

    def _run_side_info(self, config: ExperimentConfig, result: ExperimentResult) -> float:
        params: SideInfoParams = config.side_info
        if self.image_source_factory is None:
            raise ConfigurationException("side-info needs an image source", path=params.image_path)
        image_source = self.image_source_factory(params)
        image_source.load()
        P = params.patch_size
        d = P * P
        for name, count in (("fixed_count", params.fixed_count), ("growing_fixed_start", params.growing_fixed_start)):
            if count > d:
                raise ParameterException(f"{name} exceeds the patch size", parameter=f"side_info.{name}", value=count)
        basis = Transform.dct(P, P)
        haar_of_dct = Transform.composed(outer=Transform.haar(P, P), inner=basis)

        def trial(index: int, seed: int) -> dict:
            signal = make_patch_signal(image_source, P, derive_seed(seed, 0), basis=basis)
            model = make_measurements(signal, EnsembleKind.COMPOSED, derive_seed(seed, 1), m=params.m, basis=basis)
            x = signal.x
            ball = ConstraintSet.l1_ball(d, float(np.abs(x).sum()))
            ranked = [int(i) for i in ranked_coefficients(haar_of_dct, x)]
            oracle = oracle_energy_subset(haar_of_dct, x, params.energy_fraction)
            start = len(oracle_energy_subset(haar_of_dct, x, params.growing_start_fraction))
            operators = {
                "oracle": InexactOperator.coefficient_subset(haar_of_dct, oracle),
                "growing_oracle": InexactOperator.growing_subset(haar_of_dct, ranked, start, d,
                                                                 params.growing_step, params.growing_every),
                "fixed": InexactOperator.coefficient_subset(haar_of_dct, range(params.fixed_count)),
                "growing_fixed": InexactOperator.growing_subset(haar_of_dct, list(range(d)),
                                                                params.growing_fixed_start, d,
                                                                params.growing_fixed_step, params.growing_every),
            }
            common = dict(step_size=default_step_size(model, params.step_policy), max_iterations=params.iterations,
                          store_every=params.iterations, constraint=ball)
            traces = {"pgd": run_pgd(model, solver_config(Algorithm.PGD, label="pgd", **common))}
            for label, operator in operators.items():
                traces[label] = run_ipgd(model, solver_config(Algorithm.IPGD, inexact=operator, label=label, **common))
            report = measure_epsilon(operators["oracle"], ball, x)
            epsilon = {
                "trial": index,
                "oracle_count": len(oracle),
                "epsilon_sufficient": report.epsilon_sufficient,
                "epsilon_convex": report.epsilon_convex,
            }
            return {"traces": traces, "epsilon": epsilon}

        batch = self.runner.run(trial, config.resolved_trials, config.seed, label="side-info")
        self._export_traces([r["traces"] for r in batch.results], result)
        epsilon_rows = [r["epsilon"] for r in batch.results]
        self._export(result, "epsilon.csv", epsilon_rows,
                     ["trial", "oracle_count", "epsilon_sufficient", "epsilon_convex"])
        result.summary["epsilon_sufficient_mean"] = float(np.mean([r["epsilon_sufficient"] for r in epsilon_rows]))
        return batch.memory_peak_mb

    # Bound dominance on small instances

    def _run_bound_check(self, config: ExperimentConfig, result: ExperimentResult) -> float:
        params: BoundCheckParams = config.bound_check
        if not 1 <= params.k <= params.d // 2:
            raise ParameterException("bound-check needs 2k <= d", parameter="bound_check.k", value=params.k)
        if any(not 0 <= drop < params.k for drop in params.dropped):
            raise ParameterException("p may drop fewer than k support entries", parameter="bound_check.dropped")
        iterations = params.iterations

        def trial(index: int, seed: int) -> List[dict]:
            x = make_sparse_codes(1, params.d, params.k, derive_seed(seed, 0))[0]
            model = make_measurements(SignalInstance.custom(x), EnsembleKind.IID_GAUSSIAN, derive_seed(seed, 1),
                                      m=params.m)
            mu = 1.0 / params.m
            sparse = ConstraintSet.k_sparse(params.d, params.k)
            cone = ConeDescriptor.sparse_difference(params.d, params.k)
            norm_x = float(np.linalg.norm(x))
            rho = rho_brute_force(model, cone, mu).value
            common = dict(step_size=mu, max_iterations=iterations, store_every=iterations, constraint=sparse)

            rows = []
            pgd = run_pgd(model, solver_config(Algorithm.PGD, **common))
            exact = BoundParameters(rho=rho, rho_p=rho, kappa=cone.kappa, epsilon=0.0, norm_x=norm_x)
            rows += _bound_rows(index, 2, 0, rho, rho, 0.0, pgd.errors(), bound_curve(2, exact, iterations))

            support = np.flatnonzero(x)
            by_magnitude = support[np.argsort(np.abs(x[support]), kind="stable")]
            for drop in params.dropped:
                kept = np.setdiff1d(np.arange(params.d), by_magnitude[:drop])
                p = InexactOperator.coefficient_subset(Transform.identity(params.d), kept)
                rho_p = rho_brute_force(model, cone, mu, inexact=p).value
                epsilon = mask_epsilon_upper_bound(p, x)
                ipgd = run_ipgd(model, solver_config(Algorithm.IPGD, inexact=p, **common))
                bound = BoundParameters(rho=rho, rho_p=rho_p, kappa=cone.kappa, epsilon=epsilon, norm_x=norm_x)
                rows += _bound_rows(index, 4, drop, rho, rho_p, epsilon, ipgd.errors(),
                                    bound_curve(4, bound, iterations))
            return rows

        batch = self.runner.run(trial, config.resolved_trials, config.seed, label="bound-check")
        rows = [row for trial_rows in batch.results for row in trial_rows]
        self._export(result, "bound_check.csv", rows,
                     ["trial", "theorem", "dropped", "t", "rho", "rho_p", "epsilon", "measured", "bound", "violated"])
        result.summary["violations"] = int(sum(row["violated"] for row in rows))
        result.summary["checked"] = len(rows)
        return batch.memory_peak_mb

    # Width table

    def _run_width_table(self, config: ExperimentConfig, result: ExperimentResult) -> float:
        params: WidthTableParams = config.width_table
        rows = []
        case = 0
        for levels in params.tree_levels:
            d = (1 << levels) - 1
            for k in params.ks:
                if 2 * k > d:
                    continue
                reference = np.zeros(d)
                reference[:k] = 1.0
                estimates = {
                    "sparse-difference": (mean_width_monte_carlo(ConeDescriptor.sparse_difference(d, k),
                                                                 params.samples, derive_seed(config.seed, case),
                                                                 runner=self.runner), sparse_width_scale(d, k)),
                    "tree-difference": (mean_width_monte_carlo(ConeDescriptor.tree_difference(d, k),
                                                               params.samples, derive_seed(config.seed, case + 1),
                                                               runner=self.runner), tree_width_scale(k)),
                    "l1-descent-cone": (statistical_dimension_l1(reference), sqrt(2 * k * log(d / k))),
                }
                case += 2
                for cone, (estimate, scale) in estimates.items():
                    rows.append({
                        "d": d,
                        "k": k,
                        "cone": cone,
                        "value": estimate.value,
                        "stderr": estimate.stderr,
                        "samples": estimate.samples,
                        "method": estimate.method.value,
                        "upper_bound": estimate.is_upper_bound,
                        "scale": scale,
                    })
        self._export(result, "width_table.csv", rows,
                     ["d", "k", "cone", "value", "stderr", "samples", "method", "upper_bound", "scale"])
        return 0.0

    # Learned networks and their mixture

    def _run_lista_mm(self, config: ExperimentConfig, result: ExperimentResult) -> float:
        params: ListaParams = config.lista_mm
        M = normalized_gaussian_matrix(params.m, params.d, derive_seed(config.seed, 0))
        dataset, reference_objectives = synthetic_dataset(M, params.train_samples, params.k, params.lam,
                                                          derive_seed(config.seed, 1), params.reference_iterations)
        test_codes = make_sparse_codes(params.test_samples, params.d, params.k, derive_seed(config.seed, 2))
        Y_test = test_codes @ M.T
        training_config = params.training.to_training_config(derive_seed(config.seed, 3))
        initial = default_network(M, params.layers, params.lam)
        single = train(initial, dataset, training_config)
        mixture = train_mixture(params.mixture_size, initial, dataset, training_config, reference_objectives,
                                params.refinement_rounds)

        ista_curve = layer_objectives(initial, Y_test, M, params.lam)
        single_curve = layer_objectives(single.network, Y_test, M, params.lam)
        per_network = [
            [sample_objectives(Z, Y_test, M, params.lam) for Z in forward_batch(network, Y_test).outputs]
            for network in mixture.networks
        ]
        mixture_curve = [float(np.min([net[t] for net in per_network], axis=0).mean())
                         for t in range(params.layers + 1)]
        _, long_run = reference_ista(Y_test, M, params.lam, 10 * params.layers)
        rows = [
            {"depth": t, "ista": float(ista_curve[t]), "lista": float(single_curve[t]), "lista_mm": mixture_curve[t]}
            for t in range(params.layers + 1)
        ]
        self._export(result, "objective_vs_depth.csv", rows, ["depth", "ista", "lista", "lista_mm"])
        self._export(result, "loss_history.csv", single.history, ["epoch", "train_loss", "val_loss", "lr"])
        self._export(result, "mixture_history.csv",
                     [{"round": i, "objective": v} for i, v in enumerate(mixture.objective_history)],
                     ["round", "objective"])
        result.summary.update({
            "ista_objective": float(ista_curve[-1]),
            "ista_long_objective": float(long_run.mean()),
            "lista_objective": float(single_curve[-1]),
            "lista_mm_objective": mixture_curve[-1],
        })
        return 0.0

    # Output helpers

    def _export_traces(self, trials: List[Dict[str, ConvergenceTrace]], result: ExperimentResult,
                       selected: Optional[List[int]] = None) -> None:
        """Aggregate every label. With `selected`, trace files cover those trials and `_all` files cover every trial."""
        chosen = trials if selected is None else [trials[index] for index in selected]
        for label in trials[0]:
            rows = aggregate_traces([traces[label] for traces in chosen])
            self._export(result, f"trace_{label}.csv", rows, AGGREGATE_COLUMNS)
            if selected is not None:
                self._export(result, f"trace_{label}_all.csv",
                             aggregate_traces([traces[label] for traces in trials]), AGGREGATE_COLUMNS)
            self._export(result, f"raw_{label}_trial0.csv", trials[0][label].to_rows(), RAW_COLUMNS)
            result.summary[label] = {
                "final_rel_err": rows[-1]["rel_err_mean"],
                "operations": rows[-1]["operations_cumulative"],
            }

    def _export(self, result: ExperimentResult, name: str, rows: List[dict], columns: List[str]) -> None:
        result.files[name] = self.exporter.export_rows(rows, result.output_dir / name, columns)

    def _write_manifest(self, config: ExperimentConfig, result: ExperimentResult, peak_memory: float) -> None:
        result.manifest = {
            "experiment": config.name.value,
            "seed": config.seed,
            "trials": config.resolved_trials,
            "config": config.model_dump(mode="json"),
            "config_hash": config.config_hash(),
            "versions": package_versions(),
            "files": {name: self.exporter.content_hash(path) for name, path in sorted(result.files.items())},
            "peak_memory_mb": peak_memory,
            "summary": result.summary,
        }
        result.files[MANIFEST_FILE] = self.exporter.export_document(result.manifest, result.output_dir / MANIFEST_FILE)


def _bound_rows(trial: int, theorem: int, dropped: int, rho: float, rho_p: float, epsilon: float,
                measured: np.ndarray, bound: np.ndarray) -> List[dict]:
    return [
        {
            "trial": trial,
            "theorem": theorem,
            "dropped": dropped,
            "t": t,
            "rho": rho,
            "rho_p": rho_p,
            "epsilon": epsilon,
            "measured": float(measured[t]),
            "bound": float(bound[t]),
            "violated": bool(measured[t] > bound[t] + 1e-9),
        }
        for t in range(len(bound))
    ]


def package_versions() -> Dict[str, str]:
    versions = {"python": platform.python_version()}
    for package in VERSIONED_PACKAGES:
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            versions[package] = "unknown"
    return versions
