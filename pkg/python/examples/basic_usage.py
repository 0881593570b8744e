#!/usr/bin/env python3
"""
fracspde Python Example - Noise, Integrals and a Neuron Run

Demonstrates basic usage of the fracspde library for:
- Sampling fractional and Hermite paths
- Wiener integrals of step functions and their isometry
- Stochastic convolution of a scalar test equation
- A small noisy neuron ensemble
"""

import argparse

import numpy as np

import fracspde as fs
from fracspde.convolution import convolve, scalar_variance


def main(seed: int = 0, paths: int = 400):
    print("╔═══════════════════════════════════════════════════════════╗")
    print("║  fracspde Python Example - Long-Memory Noise               ║")
    print("╚═══════════════════════════════════════════════════════════╝")
    print(f"\nVersion: {fs.__version__}")
    print()

    grid = fs.TimeGrid(1.0, 64)

    # 1. Sample paths and compare covariances
    print("1. Sampling fBm paths (H=0.75)...")
    kernel = fs.fbm(0.75)
    values = fs.sample_paths(kernel, grid, seed, paths)
    k = grid.snap(0.5)
    est = fs.mc_covariance(values[:, k], values[:, -1])
    print(f"   R(0.5, 1) analytic:  {fs.cov(kernel, 0.5, 1.0):.4f}")
    print(f"   R(0.5, 1) empirical: {est.estimate:.4f} ± {est.stderr:.4f}")

    rosenblatt = fs.hermite(0.7, 2)
    hpaths = fs.sample_paths(rosenblatt, grid, seed, 50, m_inner=256)
    print(f"   Rosenblatt Var Z(1): {np.var(hpaths[:, -1]):.3f} (target 1)")

    # 2. Wiener integral of a step function
    print("\n2. Wiener integral of 1_[0.25, 0.75)...")
    f = fs.StepFunction.indicator(0.25, 0.75)
    integrals = [fs.wiener_integral_step(f, fs.sample_path(kernel, grid, fs.path_seed(seed, i)))
                 for i in range(paths)]
    print(f"   ||f||_H^2: {fs.h_norm(f, kernel) ** 2:.4f}")
    print(f"   E I(f)^2:  {fs.mc_mean(np.square(integrals)).estimate:.4f}")

    # 3. Scalar stochastic convolution
    print("\n3. Convolution of dX = -X dt + dB^H...")
    spec = fs.scalar_operator(1.0)
    finals = []
    for i in range(paths):
        noise = fs.embed_scalar(values[i], grid, kernel, fs.path_seed(seed, i))
        finals.append(convolve(spec, noise).values[-1, 0])
    print(f"   Var W_A(1) empirical: {np.var(finals):.4f}")
    print(f"   Var W_A(1) quadrature: {scalar_variance(1.0, kernel, 1.0):.4f}")

    # 4. Neuron ensemble
    print("\n4. Neuron ensemble (fBm vs Wiener)...")
    report = fs.run_experiment(
        kernel=fs.fbm(0.7), ensemble=8, seed=seed, n_x=16, grid=fs.TimeGrid(1.0, 64),
        qspec=fs.QSpec(r=2.0, J=8, basis="sine"),
    )
    print(f"   sup ||u||: {report.sup_norm:.3f}")
    print(f"   autocorrelation z (fBm - Wiener): {report.long_memory_z}")

    print("\n✓ Done")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="fracspde basic usage")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--paths", type=int, default=400)
    args = parser.parse_args()
    main(args.seed, args.paths)
