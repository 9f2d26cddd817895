"""Smoke test for the usc_py extension.

Build with `maturin develop -m crates/py/Cargo.toml`, or run this script
directly: when the module is not installed it builds the cdylib with cargo
and imports it from a temporary directory.
"""

import importlib
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        return importlib.import_module("usc_py")
    except ImportError:
        pass
    subprocess.run(["cargo", "build", "--release", "-p", "usc-py"], cwd=ROOT, check=True)
    lib = ROOT / "target" / "release" / "libusc_py.so"
    tmp = pathlib.Path(tempfile.mkdtemp())
    shutil.copy(lib, tmp / "usc_py.so")
    sys.path.insert(0, str(tmp))
    return importlib.import_module("usc_py")


def main():
    usc = load()
    print("usc_py", usc.__version__, usc.SCHEMES)

    bits = [1, 0, 0, 1, 1, 1, 0, 0]
    assert list(usc.qam_demap(usc.qam_map(bits, 4), 4)) == bits

    cfg = usc.FrameConfig("OTSM", m=16, n=16, guard_len=7, l_max=3)
    assert cfg.data_bits == 2 * 9 * 16, cfg.data_bits
    payload = [(i * 7 + 3) % 5 % 2 for i in range(cfg.data_bits)]
    grid = usc.build_frame(payload, cfg)
    samples = usc.modulate(grid, cfg)
    back = usc.demodulate(samples, cfg)
    err = max(abs(a - b) for ra, rb in zip(grid, back) for a, b in zip(ra, rb))
    assert err < 1e-10, err

    chan = usc.Channel.eva(cfg, 120.0, seed=3)
    assert len(chan) == cfg.frame_len and chan.l_max == 3
    nv = usc.snr_to_noise_var(30.0, cfg)
    rx = chan.apply(samples, sigma_w=nv ** 0.5, seed=4)
    for det in ("single-tap", "mmse", "mf-gs"):
        out = usc.detect(rx, chan, cfg, detector=det, noise_var=nv)
        errors = sum(a != b for a, b in zip(out["bits"], payload))
        print(f"{det:>10}: {errors} bit errors, {out['iterations']} iterations")
    assert sum(a != b for a, b in zip(usc.detect(rx, chan, cfg, detector="mmse", noise_var=nv)["bits"], payload)) == 0

    boosted = usc.FrameConfig("OTSM", m=16, n=16, guard_len=7, l_max=3, pilot_boost_db=20.0)
    clean = usc.Channel.eva(boosted, 120.0, seed=5)
    tx = usc.modulate(usc.build_frame(payload, boosted), boosted)
    est = usc.estimate_channel(clean.apply(tx), boosted)
    nmse = est.squared_error(clean) / clean.energy()
    print(f"noiseless estimate NMSE {nmse:.2e}")
    assert nmse < 1e-1

    rows = usc.run_plan(preset="smoke", frames=2)
    assert len(rows) == 4 * 3 * 2 and set(rows[0]) >= {"ber", "fer", "seed"}
    checks = usc.validate()
    for name, ok, detail in checks:
        print("PASS" if ok else "FAIL", name, detail)
    assert all(ok for _, ok, _ in checks)
    print("smoke test passed")


if __name__ == "__main__":
    main()
