"""Create an empty project."""

from pathlib import Path

from monty import shutil

from spread_market.synthetic import write_synthetic_bundle


def init_project(synthetic: bool = False, seed: int = 0) -> bool:
    """
    Initialize a new project with the default configuration (../_default).

    With ``synthetic`` the folder gets a seeded synthetic data bundle and a config pointing at it instead, so that
    ``spreadmkt run`` works right away.
    """
    default_project_folder = (Path(__file__).parent / ".." / "_default").absolute()
    working_dir = Path.cwd()
    if any(working_dir.iterdir()):
        raise FileExistsError("Expect an empty folder! But current folder is not empty")
    if synthetic:
        write_synthetic_bundle(working_dir, seed=seed)
    else:
        shutil.copy_r(default_project_folder.as_posix(), working_dir.as_posix())

    return True
