"""Attack action alphabet and the two canonical attack scripts."""

from enum import IntEnum


class AttackAction(IntEnum):
    """Hidden-state alphabet. ``Continue`` is the attacker's rest action."""

    Continue = 0
    PingScan = 1
    Cve2017_7494 = 2
    NetworkServiceLogin = 3
    InstallTools = 4
    DvwaSqlInjection = 5
    Cve2015_1427 = 6

    @classmethod
    def parse(cls, name):
        try:
            return cls[name]
        except KeyError:
            raise ValueError(f"unknown attack action {name!r}") from None


A = AttackAction

_TYPE1 = (
    A.PingScan, A.Cve2017_7494, A.NetworkServiceLogin, A.InstallTools,
    A.PingScan, A.DvwaSqlInjection, A.NetworkServiceLogin, A.InstallTools,
    A.PingScan, A.Cve2015_1427, A.NetworkServiceLogin, A.InstallTools,
    A.PingScan, A.Cve2017_7494, A.NetworkServiceLogin, A.InstallTools,
    A.PingScan,
)
_TYPE2 = (
    A.PingScan, A.InstallTools, A.NetworkServiceLogin, A.InstallTools,
    A.NetworkServiceLogin, A.DvwaSqlInjection, A.Cve2017_7494,
    A.NetworkServiceLogin, A.Cve2017_7494, A.PingScan, A.PingScan,
    A.InstallTools, A.NetworkServiceLogin, A.PingScan, A.Cve2015_1427,
    A.PingScan, A.InstallTools,
)


class AttackType(IntEnum):
    Type1 = 0
    Type2 = 1

    @property
    def actions(self):
        """The 17-step action script of this attack type."""
        return _TYPE1 if self is AttackType.Type1 else _TYPE2

    @classmethod
    def parse(cls, name):
        try:
            return cls[name]
        except KeyError:
            raise ValueError(f"unknown attack type {name!r}") from None


N_ACTIONS = len(AttackAction)
ATTACK_LENGTH = len(_TYPE1)
