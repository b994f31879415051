from camisac.channel import ChannelParams
from camisac.environment import Scenario
from camisac.sensing import SensingConfig


def small_scenario(n_users=2, n_antennas=4, **kw):
    bw = 1e8 / n_users
    return Scenario(
        n_users=n_users,
        n_antennas=n_antennas,
        mm=ChannelParams(n_antennas=n_antennas, wavelength=0.002, n_paths=5, bandwidth=bw),
        lte=ChannelParams(n_antennas=n_antennas, wavelength=0.1, n_paths=9, bandwidth=bw),
        sensing=SensingConfig(n_antennas=n_antennas),
        **kw,
    )
