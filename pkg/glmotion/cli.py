"""
Command-line entry point.

Subcommands::

    glmotion synth       --out DIR [--classes 4 --per-class 100 ...]
    glmotion import-ntu  FILE_OR_DIR ... --out DIR
    glmotion pretrain    --data DIR --out RUN
    glmotion probe       --data DIR --test-data DIR (--checkpoint FILE | --random-backbone)
    glmotion finetune    --data DIR --test-data DIR (--checkpoint FILE | --random-backbone)
    glmotion analyze     --data DIR --checkpoint FILE --out DIR
    glmotion gradcheck

Exit codes: 0 success, 1 usage error, 2 data, format or config error,
3 numeric error.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from glmotion.analysis import DEFAULT_SAMPLES, DEFAULT_WINDOW, average_attention, export_attention, export_posemb
from glmotion.config import build_configs, build_run_config, resolve_settings, write_resolved
from glmotion.errors import DataError, DeterminismError, GlMotionError, NumericError, UsageError
from glmotion.model.checkpoint import load_checkpoint
from glmotion.model.gl_base import ModelParams
from glmotion.sequence_io import NTU_CENTER_JOINT, NTU_MAX_BODIES, import_ntu_files, read_dataset, write_dataset
from glmotion.synth_generator import FAMILIES, synth_generate
from glmotion.training import finetune_semi, linear_probe, pretrain, toy_gradcheck

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

SEED_NAME = 'seed.txt'

# flag -> flat settings key
SETTING_FLAGS = {
    'seed': 'seed',
    'epochs': 'epochs',
    'batch_size': 'batch_size',
    'intervals': 'intervals',
    'positional_mode': 'positional_mode',
    'p2p': 'p2p_attention',
    'lambda_sigma': 'lambda_sigma',
    'corrupt': 'corrupt',
    'input_mode': 'input_mode',
    'label_fraction': 'label_fraction',
}


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(f'{self.prog}: error: {message}\n{self.format_usage()}')


def _add_setting_flags(p):
    p.add_argument('--config', help='key = value config file; command-line flags take precedence')
    p.add_argument('--seed', help='run seed (default 0)')
    p.add_argument('--epochs', help='pretraining epochs (default 120)')
    p.add_argument('--batch-size', help='batch size (default 128)')
    p.add_argument('--intervals', help='comma separated displacement intervals (default 1,5,10)')
    p.add_argument('--positional-mode', help='trainable_tight, trainable_once or fixed_sinusoidal')
    p.add_argument('--p2p', help='person-to-person spatial attention, true or false (default true)')
    p.add_argument('--lambda-sigma', help='weight of the magnitude loss (default 1.0)')
    p.add_argument('--corrupt', help='proportion of corrupted joints during pretraining (default 0)')
    p.add_argument('--input-mode', help='natural or sampled:<N> (default natural)')
    p.add_argument('--label-fraction', help='labeled fraction for fine-tuning (default 0.1)')
    p.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                   help='override any other setting, may be repeated')


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='glmotion', description='Skeleton motion pretraining with displacement prediction.')
    parser.add_argument('--log-level', default='INFO', help='logging level (default INFO)')
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    p = sub.add_parser('synth', help='generate a synthetic labeled dataset')
    p.add_argument('--out', required=True, help='dataset directory; the test split goes to OUT/test')
    p.add_argument('--classes', type=int, default=4)
    p.add_argument('--per-class', type=int, default=100)
    p.add_argument('--test-per-class', type=int, default=None, help='default half of --per-class')
    p.add_argument('--joints', type=int, default=10)
    p.add_argument('--persons', type=int, default=1)
    p.add_argument('--min-frames', type=int, default=40)
    p.add_argument('--max-frames', type=int, default=60)
    p.add_argument('--noise', type=float, default=0.01)
    p.add_argument('--random-phase', action='store_true', help='draw the oscillation phase per sequence')
    p.add_argument('--seed', type=int, default=0)

    p = sub.add_parser('import-ntu', help='convert NTU .skeleton files to the canonical format')
    p.add_argument('inputs', nargs='+', help='.skeleton files or directories holding them')
    p.add_argument('--out', required=True)
    p.add_argument('--center-joint', type=int, default=NTU_CENTER_JOINT)
    p.add_argument('--max-bodies', type=int, default=NTU_MAX_BODIES)

    p = sub.add_parser('pretrain', help='pretrain on unlabeled sequences')
    p.add_argument('--data', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--checkpoint', help='start from these weights instead of a fresh initialisation')
    _add_setting_flags(p)

    for name, text in (('probe', 'linear evaluation of a frozen backbone'),
                       ('finetune', 'semi-supervised fine-tuning on a labeled fraction')):
        p = sub.add_parser(name, help=text)
        p.add_argument('--data', required=True, help='labeled training split')
        p.add_argument('--test-data', required=True, help='labeled test split')
        group = p.add_mutually_exclusive_group(required=True)
        group.add_argument('--checkpoint')
        group.add_argument('--random-backbone', action='store_true', help='use a freshly initialised network')
        p.add_argument('--out', help='directory for the resolved config and result')
        _add_setting_flags(p)

    p = sub.add_parser('analyze', help='export averaged attention maps and positional-embedding similarities')
    p.add_argument('--data', required=True)
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--samples', type=int, default=DEFAULT_SAMPLES)
    p.add_argument('--window', type=int, default=DEFAULT_WINDOW)
    p.add_argument('--no-svg', action='store_true', help='write CSV files only')
    _add_setting_flags(p)

    p = sub.add_parser('gradcheck', help='finite-difference check of every gradient on a toy network')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--tol', type=float, default=1e-3)
    p.add_argument('--max-entries', type=int, default=None)
    return parser


def _overrides(args) -> dict:
    overrides = {}
    for flag, key in SETTING_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    for item in getattr(args, 'set', []):
        key, sep, value = item.partition('=')
        if not sep:
            raise UsageError(f'--set expects KEY=VALUE, got {item!r}')
        overrides[key.strip()] = value
    return overrides


def _settings(args) -> dict:
    return resolve_settings(getattr(args, 'config', None), _overrides(args))


def _dataset(path, split='dataset'):
    seqs = read_dataset(path)
    if not seqs:
        raise DataError(f'{split} {path} is empty')
    shapes = {(s.joints, s.persons) for s in seqs}
    if len(shapes) != 1:
        raise DataError(f'{split} {path} mixes joint/person counts {sorted(shapes)}')
    return seqs


def _record_run(settings, out_dir):
    write_resolved(settings, out_dir)
    (Path(out_dir) / SEED_NAME).write_text(f'{settings["seed"]}\n', encoding='utf-8')


def _backbone(args, settings, seqs):
    """
    Model config, weights and run config for an evaluation command.

    With --checkpoint the network comes from the file, and the input
    decomposition recorded at pretraining replaces the resolved
    `disentangle_mode`. With --random-backbone a fresh network is built from
    the settings.
    """
    run_cfg = build_run_config(settings)
    if getattr(args, 'checkpoint', None):
        ckpt = load_checkpoint(args.checkpoint)
        if (ckpt.model_cfg.joints, ckpt.model_cfg.persons) != (seqs[0].joints, seqs[0].persons):
            raise DataError(f'checkpoint expects K={ckpt.model_cfg.joints}, P={ckpt.model_cfg.persons}; '
                            f'data has K={seqs[0].joints}, P={seqs[0].persons}')
        mode = ckpt.meta.get('disentangle_mode')
        if mode is not None and mode != run_cfg.disentangle_mode:
            logger.info('using disentangle_mode %r recorded in %s', mode, args.checkpoint)
            run_cfg = replace(run_cfg, disentangle_mode=mode)
        return ckpt.model_cfg, ckpt.params, run_cfg
    model_cfg, _, _ = build_configs(settings, seqs[0].joints, seqs[0].persons)
    return model_cfg, ModelParams.init(model_cfg, np.random.default_rng(run_cfg.seed)), run_cfg



def cmd_synth(args) -> int:
    test_per_class = args.test_per_class if args.test_per_class is not None else max(1, args.per_class // 2)
    rng = np.random.default_rng(args.seed)
    seqs = synth_generate(rng, args.classes, args.per_class + test_per_class, args.joints, args.persons,
                          (args.min_frames, args.max_frames), noise=args.noise, random_phase=args.random_phase)
    train, test = [], []
    for i, seq in enumerate(seqs):
        (train if i % (args.per_class + test_per_class) < args.per_class else test).append(seq)
    write_dataset(train, args.out)
    write_dataset(test, Path(args.out) / 'test')
    print(f'wrote {len(train)} training and {len(test)} test sequences to {args.out} '
          f'({args.classes} classes, families {", ".join(FAMILIES)})')
    return EXIT_OK


def cmd_import_ntu(args) -> int:
    paths = []
    for item in args.inputs:
        item = Path(item)
        paths.extend(sorted(item.glob('*.skeleton')) if item.is_dir() else [item])
    if not paths:
        raise DataError('no .skeleton files found')
    seqs = import_ntu_files(paths, args.center_joint, args.max_bodies)
    write_dataset(seqs, args.out)
    print(f'imported {len(seqs)} sequences into {args.out}')
    return EXIT_OK


def cmd_pretrain(args) -> int:
    settings = _settings(args)
    seqs = _dataset(args.data)
    model_cfg, mpdp_cfg, run_cfg = build_configs(settings, seqs[0].joints, seqs[0].persons)
    _record_run(settings, args.out)
    params = heads = None
    if args.checkpoint:
        ckpt = load_checkpoint(args.checkpoint)
        params, heads = ckpt.params, ckpt.heads
        if ckpt.model_cfg.to_dict() != model_cfg.to_dict():
            raise DataError(f'{args.checkpoint} was trained with a different model configuration')
        if heads is not None and heads.cfg.intervals != mpdp_cfg.intervals:
            heads = None
    result = pretrain(seqs, model_cfg, mpdp_cfg, run_cfg, out_dir=args.out, params=params, heads=heads)
    last = result.log.records[-1] if result.log.records else None
    print(f'{result.steps} steps; final loss {last["loss"]:.6f}' if last else 'no training step taken')
    print(f'checkpoint: {result.checkpoint}')
    return EXIT_OK


def _evaluate(args, kind) -> int:
    settings = _settings(args)
    train, test = _dataset(args.data, 'training split'), _dataset(args.test_data, 'test split')
    model_cfg, params, run_cfg = _backbone(args, settings, train)
    if args.out:
        _record_run(settings, args.out)
    if kind == 'probe':
        result = linear_probe(train, test, params, model_cfg, run_cfg)
        summary = {'accuracy': result.accuracy, 'train_accuracy': result.train_accuracy,
                   'n_classes': result.n_classes, 'backbone_checksum': result.checksum}
    else:
        result = finetune_semi(train, test, params, model_cfg, run_cfg)
        summary = {'accuracy': result.accuracy, 'n_train': result.n_train, 'label_fraction': result.label_fraction}
    summary['backbone'] = 'random' if args.random_backbone else str(args.checkpoint)
    if args.out:
        (Path(args.out) / f'{kind}.json').write_text(json.dumps(summary, indent=2) + '\n', encoding='utf-8')
    print(f'{kind} accuracy: {result.accuracy:.4f}')
    return EXIT_OK


def cmd_probe(args) -> int:
    return _evaluate(args, 'probe')


def cmd_finetune(args) -> int:
    return _evaluate(args, 'finetune')


def cmd_analyze(args) -> int:
    settings = _settings(args)
    seqs = _dataset(args.data)
    model_cfg, params, run_cfg = _backbone(args, settings, seqs)
    out = Path(args.out)
    _record_run(settings, out)
    summary = average_attention(seqs, params, model_cfg, run_cfg, n_samples=args.samples, window=args.window)
    export_attention(summary, out / 'attention', svg=not args.no_svg)
    export_posemb(params['pos.M'].data, out / 'posemb', svg=not args.no_svg)
    for n, row in enumerate(summary.distances):
        print(f'block {n}: mean attended distance ' + ' '.join(f'{d:.3f}' for d in row))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    report = toy_gradcheck(seed=args.seed, tol=args.tol, max_entries=args.max_entries)
    for name, err in report.per_tensor.items():
        print(f'{name:32s} {err:.3e}')
    print(f'max relative error {report.max_rel_error:.3e} over {report.checked} entries '
          f'(tol {report.tol:g}): {"PASS" if report.passed else "FAIL"}')
    return EXIT_OK if report.passed else EXIT_NUMERIC


COMMANDS = {
    'synth': cmd_synth,
    'import-ntu': cmd_import_ntu,
    'pretrain': cmd_pretrain,
    'probe': cmd_probe,
    'finetune': cmd_finetune,
    'analyze': cmd_analyze,
    'gradcheck': cmd_gradcheck,
}


def _configure_logging(name):
    level = getattr(logging, str(name).upper(), None)
    if not isinstance(level, int):
        raise UsageError(f'unknown log level {name!r}')
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')


def run(argv=None, configure_logging=False) -> int:
    """Parse `argv`, run the command and map failures to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if configure_logging:
            _configure_logging(args.log_level)
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, DeterminismError) as e:
        logger.error('%s', e)
        return EXIT_NUMERIC
    except (GlMotionError, OSError, ValueError) as e:
        logger.error('%s', e)
        return EXIT_DATA


def main(argv=None) -> int:
    return run(argv, configure_logging=True)


if __name__ == '__main__':
    sys.exit(main())
