#!/usr/bin/env python3
"""
Dependency checker and installer for the Quantum Memory Simulator.

Reads the pinned minimum versions from requirements.txt, reports what is
missing or too old, installs it on request and finishes with a small
numerical smoke test of the simulator core.
"""

import importlib
import re
import subprocess
import sys
from importlib import metadata
from pathlib import Path

REQUIREMENTS = Path(__file__).parent / "requirements.txt"

# distribution name -> import name, where they differ
IMPORT_NAMES = {
    "pydantic-settings": "pydantic_settings",
    "python-dotenv": "dotenv",
    "python-multipart": "multipart",
}

TEST_ONLY = {"pytest", "httpx"}


def read_requirements(path=REQUIREMENTS):
    """[(spec, distribution, minimum version or None)] from a requirements file."""
    entries = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        match = re.match(r"^([A-Za-z0-9_.\-]+)(\[[^\]]+\])?\s*(?:>=\s*([0-9][0-9.]*))?", line)
        if match:
            entries.append((line, match.group(1), match.group(3)))
    return entries


def version_tuple(text):
    return tuple(int(part) for part in re.findall(r"\d+", text)[:3])


def check(distribution, minimum):
    """'ok', 'missing' or 'old <installed>'."""
    try:
        importlib.import_module(IMPORT_NAMES.get(distribution, distribution))
    except ImportError:
        return "missing"
    if minimum:
        try:
            installed = metadata.version(distribution)
        except metadata.PackageNotFoundError:
            return "ok"
        if version_tuple(installed) < version_tuple(minimum):
            return f"old {installed}"
    return "ok"


def install_package(spec):
    """Install a requirement spec using pip."""
    try:
        subprocess.check_call([sys.executable, "-m", "pip", "install", spec])
        print(f"✅ Installed {spec}")
        return True
    except subprocess.CalledProcessError as e:
        print(f"❌ Failed to install {spec}: {e}")
        return False


def smoke_test():
    """Coherent-state photon number and a Wigner value through the simulator core."""
    from analysis import wigner_origin
    from fock_core import coherent_state, mean_photon_number

    state = coherent_state(0.5, 20)
    n_mean = mean_photon_number(state)
    w0 = wigner_origin(state)
    if abs(n_mean - 0.25) > 1e-8:
        raise RuntimeError(f"coherent-state photon number {n_mean} != 0.25")
    print(f"✅ Simulator core OK (n = {n_mean:.6f}, W(0) = {w0:.6f})")


def check_and_install_dependencies():
    """Check every requirement and install the missing or outdated ones."""
    required, optional = [], []
    print(f"🔍 Checking {REQUIREMENTS.name}...")
    for spec, distribution, minimum in read_requirements():
        status = check(distribution, minimum)
        marker = "✅" if status == "ok" else ("⚠️ " if distribution in TEST_ONLY else "❌")
        print(f"{marker} {distribution}{' >= ' + minimum if minimum else ''} - {status}")
        if status != "ok":
            (optional if distribution in TEST_ONLY else required).append(spec)

    if required:
        print(f"\n📦 Installing {len(required)} missing dependencies...")
        for spec in required:
            install_package(spec)

    for spec in optional:
        choice = input(f"Install test dependency {spec}? (y/N): ").lower().strip()
        if choice == 'y':
            install_package(spec)

    print(f"\n🧪 Running smoke test...")
    smoke_test()
    print(f"🚀 You can now run: python cli.py pipeline   or   python app.py")


if __name__ == "__main__":
    print("🔧 Quantum Memory Simulator Dependency Installer")
    print("=" * 48)

    try:
        check_and_install_dependencies()
    except KeyboardInterrupt:
        print(f"\n⚠️  Installation cancelled by user")
    except Exception as e:
        print(f"\n❌ Installation failed: {e}")
        sys.exit(1)
