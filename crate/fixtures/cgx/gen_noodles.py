#!/usr/bin/env python3
"""Writes noodles.cgx.json: a hand-built call graph mirroring the published
reverse-engineering notes on the camera's `noodles` daemon.

Function ids follow the disassembler's FUN_<addr> convention; thread entry
points carry their thread name. Sites inside the recv wrapper's callers use
the addresses quoted in the notes; the rest are plausible fillers.
"""
import json

IMPORTS = [
    ("recv", 0x10a00), ("recvfrom", 0x10a0c), ("system", 0x10a18),
    ("socket", 0x10a24), ("bind", 0x10a30), ("listen", 0x10a3c),
    ("accept", 0x10a48), ("pthread_create", 0x10a54), ("strcpy", 0x10a60),
    ("sprintf", 0x10a6c), ("strcmp", 0x10a78), ("printf", 0x10a84),
]

LOCALS = {
    "main": ("main", 0x11600),
    "FUN_00014e68": None,  # recv wrapper: receive_cmd
    "FUN_00012110": None,
    "FUN_000128a0": None,  # ELFEXEC
    "FUN_00014674": None,  # DOWNLOAD
    "FUN_000147ac": None,  # UPGRADE
    "FUN_000126c0": None,
    "FUN_000146e4": None,  # UPLOAD
    "FUN_00014748": None,  # FLASHDUMP
    "FUN_00013c30": "policy_thread",
    "FUN_00013df4": None,  # spawns policy_thread
    "FUN_000143c0": None,  # SYSTEMEX
    "FUN_0001fc14": None,  # wifi recv
    "FUN_0001f9a0": None,  # wifi request wrapper, referenced three times
    "FUN_0001d2c8": None,  # STATUS
    "FUN_0001d1f8": None,  # SCAN
    "FUN_0001d3b0": None,  # SCAN_RESULTS
    "FUN_00015200": None,  # SYSTEM handler
    "FUN_0001d0f0": None,  # STATUS dispatch
    "FUN_00012b7c": "multicast_thread",
    "FUN_00013000": None,  # YGMP dispatcher / XML parse
    "FUN_000131d0": None,  # YGMP_SVR
    "FUN_00013340": None,  # YGMP_CMD
    "FUN_00016ea8": None,  # system wrapper
    "FUN_00011d40": None,  # log helper
    "FUN_00016f20": None,  # config reader
    "FUN_00011f00": None,  # command parser
    "FUN_00017010": None,  # unreferenced
}

CALLS = [
    # main
    ("main", "socket", 0x11a40),
    ("main", "bind", 0x11a80),
    ("main", "listen", 0x11a98),
    ("main", "accept", 0x11ad0),
    ("main", "FUN_00014e68", 0x11b04),
    ("main", "FUN_00011d40", 0x11b10),
    ("main", "FUN_00011f00", 0x11b24),
    ("main", "pthread_create", 0x11b80),
    ("main", "FUN_00013df4", 0x11bb0),
    ("main", "FUN_000128a0", 0x11c10),
    ("main", "FUN_00014674", 0x11c30),
    ("main", "FUN_000147ac", 0x11c50),
    ("main", "FUN_000146e4", 0x11c70),
    ("main", "FUN_00014748", 0x11c90),
    ("main", "FUN_000143c0", 0x11cb0),
    ("main", "FUN_00015200", 0x11cd0),
    # reference 2: FUN_00012110 behind three command handlers
    ("FUN_00012110", "FUN_00014e68", 0x123bc),
    ("FUN_00012110", "strcpy", 0x12400),
    ("FUN_000128a0", "FUN_00012110", 0x12920),
    ("FUN_00014674", "FUN_00012110", 0x146a0),
    ("FUN_000147ac", "FUN_00012110", 0x147d8),
    # reference 3: FUN_000126c0 behind UPLOAD and FLASHDUMP
    ("FUN_000126c0", "FUN_00014e68", 0x1272c),
    ("FUN_000146e4", "FUN_000126c0", 0x14710),
    ("FUN_00014748", "FUN_000126c0", 0x14770),
    # reference 4: policy thread
    ("FUN_00013c30", "socket", 0x13c50),
    ("FUN_00013c30", "bind", 0x13c78),
    ("FUN_00013c30", "listen", 0x13c90),
    ("FUN_00013c30", "accept", 0x13ca4),
    ("FUN_00013c30", "FUN_00014e68", 0x13cbc),
    ("FUN_00013c30", "strcmp", 0x13cd0),
    ("FUN_00013df4", "pthread_create", 0x13e20),
    # reference 5: SYSTEMEX
    ("FUN_000143c0", "FUN_00014e68", 0x144f8),
    ("FUN_000143c0", "FUN_00016ea8", 0x14520),
    # the recv wrapper itself
    ("FUN_00014e68", "recv", 0x14e9c),
    ("FUN_00014e68", "FUN_00011d40", 0x14ec0),
    # wifi chain
    ("FUN_00015200", "FUN_0001d0f0", 0x15240),
    ("FUN_00015200", "FUN_0001d1f8", 0x15260),
    ("FUN_00015200", "FUN_0001d3b0", 0x15280),
    ("FUN_0001d0f0", "FUN_0001d2c8", 0x1d120),
    ("FUN_0001d2c8", "FUN_0001f9a0", 0x1d300),
    ("FUN_0001d1f8", "FUN_0001f9a0", 0x1d230),
    ("FUN_0001d3b0", "FUN_0001f9a0", 0x1d3e8),
    ("FUN_0001f9a0", "FUN_0001fc14", 0x1f9e0),
    ("FUN_0001fc14", "recv", 0x1fc80),
    # multicast thread
    ("FUN_00012b7c", "socket", 0x12b90),
    ("FUN_00012b7c", "bind", 0x12bb8),
    ("FUN_00012b7c", "recvfrom", 0x12c04),
    ("FUN_00012b7c", "FUN_00013000", 0x12c30),
    ("FUN_00013000", "strcmp", 0x13050),
    ("FUN_00013000", "FUN_000131d0", 0x13070),
    ("FUN_00013000", "FUN_00013340", 0x13090),
    ("FUN_000131d0", "FUN_00016f20", 0x13200),
    ("FUN_000131d0", "sprintf", 0x13240),
    ("FUN_00013340", "strcmp", 0x13370),
    ("FUN_00013340", "FUN_00016ea8", 0x13390),
    ("FUN_00013340", "FUN_00016ea8", 0x133b0),
    ("FUN_00016ea8", "system", 0x16ec4),
    ("FUN_00016f20", "FUN_00011d40", 0x16f50),
    ("FUN_00011d40", "printf", 0x11d60),
    ("FUN_00011f00", "strcmp", 0x11f20),
    ("FUN_00017010", "printf", 0x17030),
]

SPAWNS = [
    ("main", "FUN_00012b7c", 0x11b80),
    ("FUN_00013df4", "FUN_00013c30", 0x13e20),
]

CONSTS = [
    (0x11a40, 1, "tcp", "protocol"),
    (0x11a80, 1, 1300, "port"),
    (0x13c50, 1, "tcp", "protocol"),
    (0x13c78, 1, 843, "port"),
    (0x12b90, 1, "udp", "protocol"),
    (0x12bb8, 1, 5012, "port"),
    (0x13390, 0, "/app/bin/cmd reset", "string"),
    (0x11b80, 2, 0x12b7c, "raw"),
    (0x13e20, 2, 0x13c30, "raw"),
]


def hx(v):
    return "0x%08x" % v


def main():
    functions = []
    for name, addr in IMPORTS:
        functions.append({"id": name, "name": name, "addr": hx(addr), "is_import": True})
    for fid, label in LOCALS.items():
        if isinstance(label, tuple):
            name, addr = label
        else:
            name = label or fid
            addr = int(fid[4:], 16)
        functions.append({"id": fid, "name": name, "addr": hx(addr), "is_import": False})
    assert len(functions) == 40, len(functions)
    doc = {
        "cgx_version": 1,
        "entry": "main",
        "functions": functions,
        "calls": [{"caller": a, "callee": b, "site": hx(s)} for a, b, s in CALLS],
        "spawns": [{"spawner": a, "entry": b, "site": hx(s)} for a, b, s in SPAWNS],
        "consts": [
            {"site": hx(s), "arg_index": i, "value": v, "kind": k} for s, i, v, k in CONSTS
        ],
    }
    with open("noodles.cgx.json", "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


if __name__ == "__main__":
    main()
