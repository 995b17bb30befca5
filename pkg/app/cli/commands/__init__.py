# CLI command exports
from app.cli.commands.train import train
from app.cli.commands.evaluate import evaluate
from app.cli.commands.ablate import ablate
from app.cli.commands.gradcheck import gradcheck
from app.cli.commands.mmd import mmd
from app.cli.commands.data import gen_data, split

__all__ = [
    "train",
    "evaluate",
    "ablate",
    "gradcheck",
    "mmd",
    "gen_data",
    "split",
]
