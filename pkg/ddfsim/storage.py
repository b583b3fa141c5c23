##
# Result files: CSV tables with a commented metadata header, matrix dumps
# and UDM grids.
##
import csv
import io
import logging
import os
from pathlib import Path

import numpy as np

from ddfsim.ddf.lattice import real_expand
from ddfsim.exceptions import StorageError

logger = logging.getLogger(__name__)


def format_value(value):
    """Shortest round-tripping text for floats, str() for the rest."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer, np.bool_)):
        return str(value.item())
    return str(value)


def csv_text(header, rows, metadata=None) -> str:
    buffer = io.StringIO()
    for key, value in (metadata or {}).items():
        buffer.write('# %s: %s\n' % (key, format_value(value)))
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(value) for value in row])
    return buffer.getvalue()


class ResultStorage:
    """
    Writes result files below one directory.
    """

    def __init__(self, path):
        self.path = Path(path)

    def create_dir_recursive(self, path: Path):
        """
        Makes sure the specified directory exists and is writable.
        :param path: The directory path to create
        :return: True if successful
        """
        if not path.exists():
            self.create_dir_recursive(path.parent)
            try:
                path.mkdir(mode=0o777)
            except OSError as exc:
                raise StorageError('Unable to create %s: %s' % (path, exc))

        if not path.is_dir():
            raise StorageError('Path %s is not a directory' % path)

        if not os.access(str(path), os.W_OK):
            raise StorageError('Unable to write to %s - check directory permissions -' % path)

        return True

    def save_text(self, filename, text) -> Path:
        self.create_dir_recursive(self.path)
        target = self.path / filename
        try:
            target.write_text(text)
        except OSError as exc:
            raise StorageError('Unable to write %s: %s' % (target, exc))
        logger.info('wrote %s', target)
        return target

    def save_csv(self, filename, header, rows, metadata=None) -> Path:
        return self.save_text(filename, csv_text(header, rows, metadata))

    ##
    # Matrix dump, one row per line, 17 significant digits. Complex matrices
    # are written in their real-expanded form.
    ##
    def save_matrix(self, filename, matrix) -> Path:
        matrix = np.atleast_2d(np.asarray(matrix))
        if np.iscomplexobj(matrix):
            matrix = real_expand(matrix)
        lines = [' '.join('%.17g' % value for value in row) for row in matrix]
        return self.save_text(filename, '\n'.join(lines) + '\n')

    def save_udm(self, filename, udm) -> Path:
        return self.save_text(filename, udm.format_grid())
