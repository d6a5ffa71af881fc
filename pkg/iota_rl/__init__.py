import logging
import os
import tempfile

logger = logging.getLogger(__name__)


class IotaError(Exception):
    """ Base class for every error this package raises on purpose """
    pass


class ConfigError(IotaError):
    pass


def reward_fmt(r):
    """ Format an average reward for tables and logs """
    return '{:.02f}'.format(r)


def mean_std_fmt(mean, std):
    return '%s ± %s' % (reward_fmt(mean), reward_fmt(std))


def atomic_write(path, data):
    """ Write bytes or text to path through a temp file and a rename """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    if isinstance(data, str):
        data = data.encode('utf-8')
    fd, tmp = tempfile.mkstemp(prefix='.tmp-', dir=directory)
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
