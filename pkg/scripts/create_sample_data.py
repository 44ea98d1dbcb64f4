"""
Script to create sample mixed-frequency CSV data for fit mode
"""
import argparse
import os
import sys

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from midasme.core.logging_config import setup_logging
from midasme.services.design_service import MeVariances
from midasme.services.dgp_service import DgpParams, simulate_sample
from midasme.services.series_loader import SeriesLoader


def create_sample_data(out_dir: str, T: int, jmax: int, theta: float,
                       sigma_u2: float, sigma_v2: float, seed: int):
    """Simulate one dataset and export it as low/high frequency CSVs"""
    os.makedirs(out_dir, exist_ok=True)
    params = DgpParams(
        T=T,
        jmax=jmax,
        theta2=theta,
        me=MeVariances(sigma_u2=sigma_u2, sigma_v2=sigma_v2),
    )
    sample = simulate_sample(params, seed)

    low_path = os.path.join(out_dir, "low_frequency.csv")
    high_path = os.path.join(out_dir, "high_frequency.csv")
    SeriesLoader.save_mixed(sample.observed, low_path, high_path)

    print(f"✓ Sample data written to {out_dir}")
    print(f"  true beta  = {params.true_beta.tolist()}")
    print(f"  true theta = {params.theta2}, sigma_eps2 = {params.sigma_eps2}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Export a simulated ADL-MIDAS dataset")
    parser.add_argument("--out-dir", default="sample_data")
    parser.add_argument("--T", type=int, default=240)
    parser.add_argument("--jmax", type=int, default=9)
    parser.add_argument("--theta", type=float, default=2.0)
    parser.add_argument("--sigma-u2", type=float, default=0.5)
    parser.add_argument("--sigma-v2", type=float, default=0.5)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    setup_logging()
    create_sample_data(args.out_dir, args.T, args.jmax, args.theta,
                       args.sigma_u2, args.sigma_v2, args.seed)
