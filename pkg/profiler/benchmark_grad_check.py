"""
Benchmark gradient checks over MLP depths and widths
"""

import argparse
import json
import os
import time

import numpy as np

from pycontamination.nn_core import Batch, MlpConfig, MlpModel, grad_check, one_hot

DEPTHS = (1, 2, 3)
WIDTHS = (8, 32, 64)
N_INPUTS = 10
N_CLASSES = 4
N_ROWS = 6
TOLERANCE = 1e-4


def parse_arguments():
    parser = argparse.ArgumentParser(
        description="Time finite-difference gradient checks on random MLPs."
    )
    parser.add_argument("out_dir", type=str, help="Output directory to save the JSON")
    parser.add_argument("--seed", type=int, default=0, help="Seed for models and batches")
    return parser.parse_args()


def random_case(depth: int, width: int, seed: int):
    """
    Random model with ``depth`` weight layers and a random batch for it.

    Hidden layers shrink from ``width`` so 3-layer models stay under the
    grad_check parameter limit.

    Example:
        random_case(3, 64, 0) -> layer sizes (10, 64, 32, 4)
    """
    hidden = [max(2, width // (2**i)) for i in range(depth - 1)]
    config = MlpConfig((N_INPUTS, *hidden, N_CLASSES), seed=seed)
    rng = np.random.default_rng([seed, depth, width])
    batch = Batch(
        rng.standard_normal((N_ROWS, N_INPUTS)),
        one_hot(rng.integers(N_CLASSES, size=N_ROWS), N_CLASSES),
    )
    return MlpModel.initialize(config), batch


def benchmark(output_json: str, seed: int = 0):
    """
    Run grad_check for every (depth, width) pair and save error, time and
    verdict per case into a JSON file.

    Args:
        output_json (str): Path to the output JSON file.
        seed (int): Seed for models and batches.
    """
    # Load existing results if the output JSON file exists
    if os.path.exists(output_json):
        with open(output_json, "r") as f:
            results = json.load(f)
    else:
        results = {}

    for depth in DEPTHS:
        for width in WIDTHS:
            key = f"depth{depth}_width{width}"
            if key in results:
                continue
            try:
                model, batch = random_case(depth, width, seed)
                started = time.perf_counter()
                error = grad_check(model, batch)
                results[key] = {
                    "layer_sizes": list(model.config.layer_sizes),
                    "num_params": model.num_params,
                    "max_relative_error": error,
                    "seconds": time.perf_counter() - started,
                    "passed": bool(error < TOLERANCE),
                }
            except Exception as e:
                results[key] = {"error": str(e)}

            with open(output_json, "w") as json_file:
                json.dump(results, json_file, indent=4)
    return results


def main():
    args = parse_arguments()

    os.makedirs(args.out_dir, exist_ok=True)
    output_json = os.path.join(args.out_dir, "grad_check_benchmark_results.json")

    benchmark(output_json, args.seed)
    print(f"Results saved to {output_json}")


if __name__ == "__main__":
    main()
