#!/usr/bin/env python3
"""
Setup script for TetMesh DB
Installs dependencies, writes the engine settings and runs a smoke check
"""

import subprocess
import sys
from pathlib import Path

MIN_PYTHON = (3, 9)
CONFIG_PATH = ".env"

# import name -> distribution name
REQUIRED_PACKAGES = {
    "click": "click",
    "dotenv": "python-dotenv",
    "numpy": "numpy",
    "pandas": "pandas",
    "rich": "rich",
    "tqdm": "tqdm",
}


def check_python_version() -> bool:
    current = sys.version_info[:3]
    if current[:2] < MIN_PYTHON:
        print(f"❌ Python {MIN_PYTHON[0]}.{MIN_PYTHON[1]}+ required, found {'.'.join(map(str, current))}")
        return False
    print(f"✅ Python {'.'.join(map(str, current))}")
    return True


def install_requirements() -> bool:
    """pip install -r requirements.txt with the running interpreter"""
    print("📦 Installing requirements.txt ...")
    result = subprocess.run([sys.executable, "-m", "pip", "install", "-r", "requirements.txt"])
    if result.returncode != 0:
        print(f"❌ pip exited with status {result.returncode}")
        return False
    return True


def missing_packages() -> list:
    missing = []
    for module, distribution in REQUIRED_PACKAGES.items():
        try:
            __import__(module)
        except ImportError:
            missing.append(distribution)
    return missing


def write_engine_settings() -> bool:
    """Write .env with the engine defaults unless one exists, then validate it"""
    from core.config import ConfigManager

    settings = ConfigManager(CONFIG_PATH)
    if Path(CONFIG_PATH).exists():
        print(f"📝 Keeping existing {CONFIG_PATH}")
    else:
        settings.save_config()
        print(f"📝 Wrote default engine settings to {CONFIG_PATH}")

    valid, message = settings.validate_config()
    print(f"{'✅' if valid else '❌'} {message}")
    return valid


def smoke_check() -> bool:
    """Build a small cube, validate it and round-trip it through the incidence view"""
    from core.mesh import validate_mesh
    from core.views import to_normalized, to_quadruple
    from utils.cube_mesh import generate_cube_mesh

    mesh = generate_cube_mesh(2)
    report = validate_mesh(mesh)
    elements = sorted(mesh.iter_elements(), key=lambda t: t.id)
    round_trip = to_quadruple(to_normalized(elements)) == elements
    print(f"🧪 cube n=2: elements={mesh.element_count} violations={len(report.violations)} round_trip={round_trip}")
    return report.is_clean and round_trip


def main():
    print("🚀 TetMesh DB Setup")
    print("=" * 40)

    if not check_python_version():
        sys.exit(1)

    if missing_packages() and not install_requirements():
        sys.exit(1)

    missing = missing_packages()
    if missing:
        print(f"❌ Still missing: {', '.join(missing)}")
        sys.exit(1)
    print("✅ Dependencies importable")

    if not write_engine_settings() or not smoke_check():
        print("❌ Setup incomplete")
        sys.exit(1)

    print("\n🎉 Ready. Try:")
    print("  python main.py gen-cube --n 3 --out cube3")
    print("  python main.py validate -w cube3")


if __name__ == "__main__":
    if len(sys.argv) > 1:
        # Invoked by a build frontend (pip/setuptools command): package metadata lives in pyproject.toml
        from setuptools import setup

        setup()
    else:
        main()
