"""
Command-line subcommands
"""

from . import compare, evaluate, oracle, plot, train


def register(subparsers) -> None:
    oracle.add_parser(subparsers)
    train.add_parsers(subparsers)
    compare.add_parser(subparsers)
    evaluate.add_parser(subparsers)
    plot.add_parser(subparsers)


__all__ = ['compare', 'evaluate', 'oracle', 'plot', 'register', 'train']
