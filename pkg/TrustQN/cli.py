"""
Command-line surface: `trustqn train | fuzz | check-grad | idx-info | solve`.

Exit codes: 0 success, 2 configuration error, 3 dataset error, 4 numerical failure.
"""
import argparse
import json
import logging
import sys

import numpy as np

from TrustQN.config import load_config
from TrustQN.curvature import CurvaturePairBuffer
from TrustQN.exceptions import (ConfigError, DatasetError, NonFiniteLossError, TrustQNError)
from TrustQN.fuzz import KINDS, run_fuzz
from TrustQN.hessian import HessianKind, build, select_gamma
from TrustQN.idx import IMAGE_MAGIC, read_idx, read_idx_header
from TrustQN.models import dataset_checksum
from TrustQN.objective import MlpObjective, QuadraticObjective, RosenbrockObjective, fd_check
from TrustQN.subproblem import FACTORIZATIONS, solve_subproblem
from TrustQN.table import MetricsTable
from TrustQN.trainers import StochasticTrainer, make_trainer

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATASET = 3
EXIT_NUMERICAL = 4

FD_TOLERANCE = 1e-5
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def build_objectives(cfg):
    """
    The function `build_objectives` creates the training objective, the optional test objective and the
    checksum of the data behind them.

    :param cfg: The `cfg` parameter is a `TrainConfig`
    :return: a tuple `(train_obj, test_obj, checksum)`.
    """
    if cfg.objective == "quadratic":
        sample_count = cfg.limit or 10 * cfg.overlap
        obj = QuadraticObjective.random_spd(cfg.dimension, cfg.condition, cfg.seed, sample_count)
        return obj, None, dataset_checksum(obj.get_h(), obj.get_g())
    if cfg.objective == "rosenbrock":
        return RosenbrockObjective(cfg.dimension), None, None

    train = read_idx(cfg.train_images, cfg.train_labels, cfg.limit)
    obj = MlpObjective(train.flat_images(), train.labels, train.num_classes, cfg.hidden_layers)
    test_obj = None
    test_pixels = None
    if cfg.test_images:
        test = read_idx(cfg.test_images, cfg.test_labels, cfg.test_limit)
        if (test.rows, test.cols) != (train.rows, train.cols):
            raise DatasetError(f"Test images are {test.rows}x{test.cols}, training images are "
                               f"{train.rows}x{train.cols}.")
        test_obj = MlpObjective(test.flat_images(), test.labels, test.num_classes, cfg.hidden_layers)
        test_pixels = test.pixels
    return obj, test_obj, dataset_checksum(train.pixels, train.labels, test_pixels)


def _exit_code(error):
    if isinstance(error, ConfigError):
        return EXIT_CONFIG
    if isinstance(error, DatasetError):
        return EXIT_DATASET
    return EXIT_NUMERICAL


def run(config_path):
    """
    The function `run` executes one training job and writes its run directory.

    :param config_path: The `config_path` parameter is a JSON configuration file
    :return: the process exit status.
    """
    try:
        cfg = load_config(config_path)
        obj, test_obj, checksum = build_objectives(cfg)
    except (ConfigError, DatasetError) as e:
        logger.error("Error during %s: %s", "setup", e)
        return _exit_code(e)

    try:
        table = MetricsTable.create_run(cfg.output_dir, cfg, checksum,
                                        extra={"objective": cfg.objective, "param_dim": obj.param_dim})
    except TrustQNError:
        return EXIT_CONFIG
    trainer = None
    try:
        trainer = make_trainer(cfg, obj, test_obj)
        records = trainer.run()
    except NonFiniteLossError as e:
        table.batch_write(e.records)
        table.finish("failed", e)
        return EXIT_NUMERICAL
    except TrustQNError as e:
        if trainer is None:
            logger.error("Error during %s: %s", "trainer setup", e)
        else:
            table.batch_write(trainer.get_records())
        table.finish("failed", e)
        return _exit_code(e)

    table.batch_write(records)
    extra = {"stop_reason": trainer.get_stop_reason()}
    if isinstance(trainer, StochasticTrainer):
        extra["fresh_evaluations"] = trainer.get_fresh_evaluations()
    table.finish("completed", **extra)
    print(table.get_run_dir())
    return EXIT_OK


def fuzz(kind, count, seed, hard_case=False, factorization='qr'):
    report = run_fuzz(count, seed, kind, hard_case, factorization)
    print(report.summary())
    for index, problems in report.failures:
        print(f"  instance {index}: {'; '.join(problems)}")
    return EXIT_OK if report.ok else EXIT_NUMERICAL


def check_grad(config_path, count=50, tolerance=FD_TOLERANCE):
    """
    The function `check_grad` compares the configured objective's gradient with central differences at
    its seeded starting point.
    """
    try:
        cfg = load_config(config_path)
        obj, _, _ = build_objectives(cfg)
    except (ConfigError, DatasetError) as e:
        logger.error("Error during %s: %s", "setup", e)
        return _exit_code(e)
    error = fd_check(obj, obj.initial_point(cfg.seed), count=count, seed=cfg.seed)
    print(f"max relative error {error:.3e} over {min(count, obj.param_dim)} coordinates")
    return EXIT_OK if error < tolerance else EXIT_NUMERICAL


def idx_info(image_path, label_path):
    try:
        for path in (image_path, label_path):
            magic, dims = read_idx_header(path)
            kind = "images" if magic == IMAGE_MAGIC else "labels"
            print(f"{path}: {kind}, magic 0x{magic:08x}, dims {tuple(dims)}")
        dataset = read_idx(image_path, label_path)
    except DatasetError as e:
        logger.error("Error during %s: %s", "dataset read", e)
        return EXIT_DATASET
    counts = np.bincount(dataset.labels, minlength=dataset.num_classes)
    print(f"{dataset.count} samples of {dataset.rows}x{dataset.cols}, label counts {counts.tolist()}")
    return EXIT_OK


def solve_instance(data):
    """
    The function `solve_instance` solves one subproblem described by a dictionary with keys `kind`,
    `s` and `y` (lists of pairs, oldest first), `g`, `delta` and optionally `gamma` and `factorization`.

    :return: a dictionary with the step, the shift, the model value and the boundary and hard-case flags.
    """
    kind = HessianKind(data["kind"])
    s_list = np.atleast_2d(np.asarray(data["s"], dtype=np.float64))
    y_list = np.atleast_2d(np.asarray(data["y"], dtype=np.float64))
    g = np.asarray(data["g"], dtype=np.float64)
    buf = CurvaturePairBuffer(max(1, len(s_list)), g.shape[0])
    for s, y in zip(s_list, y_list):
        buf.push_pair(s, y)
    gamma = data.get("gamma")
    if gamma is None:
        gamma = select_gamma(kind, buf).gamma
    solution = solve_subproblem(build(kind, buf, float(gamma)), g, float(data["delta"]),
                                data.get("factorization", "qr"))
    return {"p": solution.p.tolist(), "sigma": solution.sigma, "q_value": solution.q_value,
            "on_boundary": solution.on_boundary, "hard_case": solution.hard_case, "gamma": float(gamma)}


def solve(instance_path):
    try:
        with open(instance_path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as e:
        logger.error("Error during %s: %s", "instance read", e)
        return EXIT_CONFIG
    try:
        result = solve_instance(data)
    except (KeyError, ValueError) as e:
        logger.error("Error during %s: %s", "instance decode", e)
        return EXIT_CONFIG
    except TrustQNError as e:
        logger.error("Error during %s: %s", "subproblem solve", e)
        return _exit_code(e)
    print(json.dumps(result))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="trustqn",
                                     description="Limited-memory quasi-Newton trust-region training.")
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    train_parser = commands.add_parser("train", help="run one training job")
    train_parser.add_argument("--config", required=True)

    fuzz_parser = commands.add_parser("fuzz", help="check subproblem solvers against a dense oracle")
    fuzz_parser.add_argument("--kind", choices=KINDS, required=True)
    fuzz_parser.add_argument("--count", type=int, default=1000)
    fuzz_parser.add_argument("--seed", type=int, default=0)
    fuzz_parser.add_argument("--hard-case", action="store_true")
    fuzz_parser.add_argument("--factorization", choices=FACTORIZATIONS, default="qr")

    grad_parser = commands.add_parser("check-grad", help="finite-difference gradient check")
    grad_parser.add_argument("--config", required=True)
    grad_parser.add_argument("--count", type=int, default=50)
    grad_parser.add_argument("--tolerance", type=float, default=FD_TOLERANCE)

    idx_parser = commands.add_parser("idx-info", help="describe a pair of IDX files")
    idx_parser.add_argument("image_path")
    idx_parser.add_argument("label_path")

    solve_parser = commands.add_parser("solve", help="solve one subproblem instance given as JSON")
    solve_parser.add_argument("--instance", required=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    if args.command == "train":
        return run(args.config)
    if args.command == "fuzz":
        return fuzz(args.kind, args.count, args.seed, args.hard_case, args.factorization)
    if args.command == "check-grad":
        return check_grad(args.config, args.count, args.tolerance)
    if args.command == "idx-info":
        return idx_info(args.image_path, args.label_path)
    return solve(args.instance)


if __name__ == "__main__":
    sys.exit(main())
