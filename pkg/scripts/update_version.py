#!/usr/bin/env python3
"""
Keep the version string in sync across setup.py, pyproject.toml and the package
"""

import argparse
import re
import sys
from pathlib import Path
from typing import List, Optional, Tuple

PROJECT_ROOT = Path(__file__).resolve().parent.parent
VERSION_RE = re.compile(r"^\d+\.\d+\.\d+(-\w+)?$")

# (file, pattern capturing the version in group 1, replacement template)
VERSION_FILES: List[Tuple[Path, str, str]] = [
    (PROJECT_ROOT / "setup.py", r'version="([^"]*)"', 'version="{version}"'),
    (PROJECT_ROOT / "pyproject.toml", r'^version = "([^"]*)"', 'version = "{version}"'),
    (
        PROJECT_ROOT / "src" / "thermal_geoloc" / "__init__.py",
        r'__version__ = "([^"]*)"',
        '__version__ = "{version}"',
    ),
]


def current_version(path: Path, pattern: str) -> Optional[str]:
    match = re.search(pattern, path.read_text(encoding="utf-8"), flags=re.MULTILINE)
    return match.group(1) if match else None


def update_version_in_file(path: Path, version: str, pattern: str, replacement: str) -> bool:
    """Rewrite the first version string in a file; True when the file changed"""
    content = path.read_text(encoding="utf-8")
    new_content = re.sub(
        pattern, replacement.format(version=version), content, count=1, flags=re.MULTILINE
    )
    if content == new_content:
        print(f"⚠️  No changes in {path.relative_to(PROJECT_ROOT)}")
        return False
    path.write_text(new_content, encoding="utf-8")
    print(f"✅ Updated {path.relative_to(PROJECT_ROOT)}")
    return True


def check_versions() -> int:
    """Print every version string; non-zero exit when they disagree"""
    found = {}
    for path, pattern, _ in VERSION_FILES:
        found[path] = current_version(path, pattern) if path.exists() else None
        print(f"  {path.relative_to(PROJECT_ROOT)}: {found[path]}")
    versions = set(found.values())
    if len(versions) != 1 or None in versions:
        print("❌ Version strings are out of sync")
        return 1
    print(f"✅ All files at {versions.pop()}")
    return 0


def main() -> int:
    parser = argparse.ArgumentParser(description="Update version in project files")
    parser.add_argument("version", nargs="?", help="New version (e.g., 0.3.1)")
    parser.add_argument(
        "--dry-run", action="store_true", help="Show the files that would change"
    )
    parser.add_argument(
        "--check", action="store_true", help="Only verify the files agree"
    )
    args = parser.parse_args()

    if args.check:
        return check_versions()
    if not args.version or not VERSION_RE.match(args.version):
        print("❌ Give a semantic version (e.g., 0.3.1 or 0.3.1-beta)")
        return 1

    if args.dry_run:
        print(f"🔍 Dry run: would set version {args.version} in:")
        for path, pattern, _ in VERSION_FILES:
            old = current_version(path, pattern) if path.exists() else "file not found"
            print(f"  - {path.relative_to(PROJECT_ROOT)} ({old})")
        return 0

    print(f"🚀 Updating version to {args.version}...")
    updated = sum(
        update_version_in_file(path, args.version, pattern, replacement)
        for path, pattern, replacement in VERSION_FILES
        if path.exists()
    )
    print(f"\n✅ Updated {updated} files")
    print("📋 Next: add a CHANGELOG.md entry, commit and tag the release")
    return 0


if __name__ == "__main__":
    sys.exit(main())
