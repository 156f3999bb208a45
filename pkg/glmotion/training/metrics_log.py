from pathlib import Path


class MetricsLog:
    """
    Append-only per-epoch metrics log.

    The log is plain text: a ``#`` header naming the columns, then one
    comma-separated record per epoch::

        epoch, loss, dir_acc@1, ..., mag_acc@1, ..., lr, wall_ms

    Attributes:
        intervals (tuple): Intervals whose accuracies are logged, in column order.
        path (Path or None): File the records are appended to as they arrive.
        text (str): The full log text written so far.
        records (list): The logged records as dicts.

    Methods:
        header(self) -> str: Returns the column header line.
        append(self, epoch, loss, accuracy, lr, wall_ms) -> str: Formats, stores and writes one record.
        write(self, path) -> Path: Writes the whole log to `path`.
    """

    def __init__(self, intervals, path=None) -> None:
        self.intervals = tuple(intervals)
        self.path = Path(path) if path is not None else None
        self.records = []
        self.text = self.header()
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text(self.text, encoding='utf-8')

    def columns(self) -> list:
        return (['epoch', 'loss']
                + [f'dir_acc@{n}' for n in self.intervals]
                + [f'mag_acc@{n}' for n in self.intervals]
                + ['lr', 'wall_ms'])

    def header(self) -> str:
        return '# ' + ', '.join(self.columns()) + '\n'

    def append(self, epoch, loss, accuracy, lr, wall_ms=0) -> str:
        """
        Formats one epoch record and appends it to the log.

        Args:
            epoch (int): 1-based epoch number.
            loss (float): Mean training loss of the epoch.
            accuracy (dict): ``{'dir': {n: acc}, 'mag': {n: acc}}``.
            lr (float): Learning rate used during the epoch.
            wall_ms (int): Wall time of the epoch in milliseconds, 0 when not measured.

        Returns:
            str: The formatted line.
        """
        txt = f'{epoch}, {loss:.12g}'
        for kind in ('dir', 'mag'):
            for n in self.intervals:
                txt += f', {accuracy[kind][n]:.6f}'
        txt += f', {lr:.6g}, {int(wall_ms)}\n'

        self.records.append({'epoch': epoch, 'loss': loss, 'accuracy': accuracy, 'lr': lr, 'wall_ms': int(wall_ms)})
        self.text += txt
        if self.path is not None:
            with open(self.path, 'a', encoding='utf-8') as f:
                f.write(txt)
        return txt

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.text, encoding='utf-8')
        return path
