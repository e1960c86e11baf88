from decaylab.commands import audit, envelope, gramian, simulate, sweep

COMMANDS = {
    "simulate": simulate,
    "sweep": sweep,
    "audit": audit,
    "gramian": gramian,
    "envelope": envelope,
}
