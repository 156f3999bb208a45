"""
Reading and writing skeleton sequences.

The canonical format is one JSON object per file:

    {"version": 1, "id": "...", "label": 3, "T": 40, "P": 1, "K": 25,
     "center_joint": 1, "coords": [... T*P*K*3 numbers, (t, p, k, xyz) row-major ...]}

Unknown fields are rejected. A dataset is a directory holding such files
plus ``manifest.txt`` listing their relative paths, one per line.

NTU RGB+D ``.skeleton`` files can be imported with `parse_ntu_skeleton`;
they are never written back.
"""

import json
import logging
import re
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from glmotion.errors import DataError, FormatError, ParseError
from glmotion.sequence import RawSequence

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MANIFEST_NAME = 'manifest.txt'

NTU_JOINTS = 25
# spine middle, 0-based
NTU_CENTER_JOINT = 1
NTU_MAX_BODIES = 2


class SequenceRecord(BaseModel):
    """Schema of the canonical sequence file."""

    model_config = ConfigDict(extra='forbid', strict=True)

    version: Literal[1]
    id: str
    label: Optional[int]
    T: int
    P: int
    K: int
    center_joint: int
    coords: List[float]


def write_sequence(seq: RawSequence) -> str:
    """Serialise a sequence to canonical text."""
    record = {
        'version': FORMAT_VERSION,
        'id': seq.id,
        'label': seq.label,
        'T': seq.frames,
        'P': seq.persons,
        'K': seq.joints,
        'center_joint': seq.center_joint,
        'coords': seq.coords.reshape(-1).tolist(),
    }
    # json writes floats with repr, which round-trips exactly
    return json.dumps(record)


def read_sequence(text) -> RawSequence:
    """
    Parse canonical text into a RawSequence.

    Args:
        text (str or bytes): File contents.

    Returns:
        RawSequence: The parsed sequence.

    Raises:
        ParseError: On malformed JSON or a schema violation, with the offending path.
        FormatError: If the declared sizes are inconsistent or T is 0.
    """
    if isinstance(text, bytes):
        text = text.decode('utf-8')
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f'invalid JSON: {exc.msg}', line=exc.lineno) from exc
    try:
        record = SequenceRecord.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        path = '.'.join(str(part) for part in first['loc']) or '<root>'
        raise ParseError(first['msg'], path=path) from exc

    if record.T < 1:
        raise FormatError(f'sequence {record.id!r} declares T={record.T}; at least one frame is required')
    expected = record.T * record.P * record.K * 3
    if len(record.coords) != expected:
        raise FormatError(f'sequence {record.id!r} has {len(record.coords)} coordinates, expected T*P*K*3={expected}')
    coords = np.array(record.coords, dtype=np.float64).reshape(record.T, record.P, record.K, 3)
    return RawSequence(coords, record.center_joint, record.label, record.id)


def save_sequence(path, seq: RawSequence) -> None:
    Path(path).write_text(write_sequence(seq), encoding='utf-8')


def load_sequence(path) -> RawSequence:
    return read_sequence(Path(path).read_text(encoding='utf-8'))


def write_dataset(seqs, directory, prefix: str = 'seq') -> Path:
    """
    Write sequences as canonical files plus a manifest.

    Args:
        seqs (list of RawSequence): Sequences to write, in manifest order.
        directory (str or Path): Target directory, created if missing.
        prefix (str): File name prefix.

    Returns:
        Path: The manifest path.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for i, seq in enumerate(seqs):
        name = f'{prefix}_{i:05d}.json'
        save_sequence(directory / name, seq)
        names.append(name)
    manifest = directory / MANIFEST_NAME
    manifest.write_text(''.join(f'{name}\n' for name in names), encoding='utf-8')
    logger.info('wrote %d sequences to %s', len(names), directory)
    return manifest


def read_dataset(directory) -> List[RawSequence]:
    """
    Read every sequence listed in ``<directory>/manifest.txt``, in manifest order.

    Raises:
        DataError: If the manifest is missing.
    """
    directory = Path(directory)
    manifest = directory / MANIFEST_NAME
    if not manifest.is_file():
        raise DataError(f'no {MANIFEST_NAME} in {directory}')
    seqs = []
    for line in manifest.read_text(encoding='utf-8').splitlines():
        name = line.strip()
        if not name or name.startswith('#'):
            continue
        seqs.append(load_sequence(directory / name))
    return seqs


class _LineCursor:
    """Walks the non-empty lines of a text, remembering line numbers."""

    def __init__(self, text: str):
        self.lines = [(number, line.split()) for number, line in enumerate(text.splitlines(), start=1)
                      if line.strip()]
        self.position = 0
        self.last_line = 0

    def next_fields(self):
        if self.position >= len(self.lines):
            last = self.lines[-1][0] if self.lines else 0
            raise FormatError(f'unexpected end of file after line {last}')
        number, fields = self.lines[self.position]
        self.position += 1
        self.last_line = number
        return number, fields

    def read_int(self) -> int:
        number, fields = self.next_fields()
        try:
            return int(fields[0])
        except ValueError:
            raise ParseError(f'expected an integer, found {fields[0]!r}', line=number) from None

    def read_floats(self, minimum: int):
        number, fields = self.next_fields()
        try:
            values = [float(v) for v in fields]
        except ValueError:
            bad = next(v for v in fields if not _is_number(v))
            raise ParseError(f'non-numeric token {bad!r}', line=number) from None
        if len(values) < minimum:
            raise FormatError(f'line {number} has {len(values)} fields, expected at least {minimum}')
        return values


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def _presence_note(counts) -> str:
    """Run-length note such as ``2x40,1x3`` of the bodies present per frame."""
    runs = []
    for count in counts:
        if runs and runs[-1][0] == count:
            runs[-1][1] += 1
        else:
            runs.append([count, 1])
    return ','.join(f'{count}x{length}' for count, length in runs)


def parse_ntu_skeleton(data, center_joint_index: int = NTU_CENTER_JOINT, max_bodies: int = NTU_MAX_BODIES,
                       seq_id: str = 'ntu', label=None) -> RawSequence:
    """
    Import an NTU RGB+D ``.skeleton`` file.

    The layout is: frame count; per frame a body count; per body one
    metadata line, a joint count and one line per joint whose first three
    fields are x y z. Bodies beyond `max_bodies` are dropped in file order,
    missing bodies are zero-filled, and the per-frame body count is folded
    into the id as ``<seq_id>|bodies=<run-length note>``.

    Args:
        data (bytes or str): File contents.
        center_joint_index (int): Center joint (spine) index.
        max_bodies (int): Persons kept per frame (P).
        seq_id (str): Identifier, usually the file stem.
        label (int, optional): Action class id.

    Returns:
        RawSequence: Sequence with P = `max_bodies` and K = 25.

    Raises:
        ParseError: On a non-numeric token, with its line number.
        FormatError: On an empty stream, a truncated file or a joint count other than 25.
    """
    text = data.decode('utf-8') if isinstance(data, bytes) else data
    cursor = _LineCursor(text)
    if not cursor.lines:
        raise FormatError('empty skeleton stream')

    n_frames = cursor.read_int()
    if n_frames < 1:
        raise FormatError(f'skeleton file declares {n_frames} frames')
    coords = np.zeros((n_frames, max_bodies, NTU_JOINTS, 3))
    presence = []

    for t in range(n_frames):
        n_bodies = cursor.read_int()
        for b in range(n_bodies):
            cursor.read_floats(minimum=1)
            n_joints = cursor.read_int()
            if n_joints != NTU_JOINTS:
                raise FormatError(f'body {b} of frame {t} has {n_joints} joints (line {cursor.last_line}), '
                                  f'expected {NTU_JOINTS}')
            for j in range(n_joints):
                xyz = cursor.read_floats(minimum=3)[:3]
                if b < max_bodies:
                    coords[t, b, j] = xyz
        if n_bodies > max_bodies:
            logger.debug('%s frame %d: dropped %d extra bodies', seq_id, t, n_bodies - max_bodies)
        presence.append(min(n_bodies, max_bodies))

    full_id = f'{seq_id}|bodies={_presence_note(presence)}'
    return RawSequence(coords, center_joint_index, label, full_id)


def ntu_label_from_name(name: str) -> Optional[int]:
    """Zero-based action id from an NTU file name such as ``S001C001P001R001A050``."""
    match = re.search(r'A(\d{3})', name)
    return int(match.group(1)) - 1 if match else None


def import_ntu_files(paths, center_joint_index: int = NTU_CENTER_JOINT, max_bodies: int = NTU_MAX_BODIES):
    """Parse several ``.skeleton`` files, labels taken from their names."""
    seqs = []
    for path in paths:
        path = Path(path)
        seqs.append(parse_ntu_skeleton(path.read_bytes(), center_joint_index, max_bodies,
                                       seq_id=path.stem, label=ntu_label_from_name(path.stem)))
    return seqs
