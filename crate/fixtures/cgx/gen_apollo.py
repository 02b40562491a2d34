#!/usr/bin/env python3
"""Writes apollo.cgx.json: a synthetic call graph whose thread/port/sink
structure mirrors the published description of the camera's `apollo`
daemon: 65 threads, 7 listening ports, 25 functions that call recv.

Sink-containing functions repeat their sink call at many sites, so the raw
candidate count is an order of magnitude above the per-function view.
"""
import json

SITES_PER_SINK_FN = 12

PORTS = [
    (3702, "tcp", ["onvif_discovery_thread", "onvif_notify_thread", "onvif_hello_thread"]),
    (6688, "tcp", ["http_server_thread", "http_worker_thread", "http_session_thread"]),
    (8554, "tcp", ["rtsp_server_thread", "rtsp_session_thread"]),
    (8699, "tcp", ["ut_cmd_server_init", "ut_rcmd_server_proc"]
     + ["audio_input_proc", "audio_output_proc"]
     + ["ut_cmd_proc_%02d" % i for i in range(48)]),
    (9876, "tcp", ["yserver_tcp_thread", "yserver_tcp_worker", "yserver_tcp_session"]),
    (5683, "udp", ["coap_thread"]),
    (19966, "udp", ["yserver_udp_thread"]),
]

IMPORTS = ["recv", "recvfrom", "recvmsg", "system", "socket", "bind", "listen",
           "accept", "pthread_create", "memcpy", "strcmp", "printf"]


class Builder:
    def __init__(self):
        self.functions = []
        self.calls = []
        self.spawns = []
        self.consts = []
        self.next_addr = 0x00020000
        self.next_site = {}

    def func(self, name=None):
        addr = self.next_addr
        self.next_addr += 0x400
        fid = "FUN_%08x" % addr
        self.functions.append({"id": fid, "name": name or fid, "addr": "0x%08x" % addr,
                               "is_import": False})
        self.next_site[fid] = addr + 0x10
        return fid

    def site(self, caller):
        s = self.next_site[caller]
        self.next_site[caller] = s + 4
        return "0x%08x" % s

    def call(self, caller, callee):
        s = self.site(caller)
        self.calls.append({"caller": caller, "callee": callee, "site": s})
        return s

    def spawn(self, spawner, entry):
        s = self.call(spawner, "pthread_create")
        self.spawns.append({"spawner": spawner, "entry": entry, "site": s})


def main():
    b = Builder()
    for i, name in enumerate(IMPORTS):
        b.functions.append({"id": name, "name": name, "addr": "0x%08x" % (0x10000 + 12 * i),
                            "is_import": True})
    b.functions.append({"id": "main", "name": "main", "addr": "0x00018000", "is_import": False})
    b.next_site["main"] = 0x18010
    start = b.func("start_services")
    b.call("main", start)
    log = b.func("log_printf")
    b.call(log, "printf")
    b.call("main", log)

    sinks = ["recv", "recvfrom", "recvmsg"]
    recv_fns = []
    for i in range(25):
        fid = b.func()
        for _ in range(SITES_PER_SINK_FN):
            b.call(fid, sinks[i % 3])
        recv_fns.append(fid)

    copy_fns = []
    for _ in range(5):
        fid = b.func()
        for _ in range(SITES_PER_SINK_FN):
            b.call(fid, "memcpy")
        copy_fns.append(fid)

    thread_no = 0
    for port, proto, names in PORTS:
        entries = [b.func(n) for n in names]
        server = entries[0]
        b.spawn(start, server)
        s = b.call(server, "socket")
        b.consts.append({"site": s, "arg_index": 1, "value": proto, "kind": "protocol"})
        s = b.call(server, "bind")
        b.consts.append({"site": s, "arg_index": 1, "value": port, "kind": "port"})
        if proto == "tcp":
            b.call(server, "listen")
            b.call(server, "accept")
        if port == 8699:
            rcmd = entries[1]
            b.spawn(server, rcmd)
            parser = b.func()  # command parser: '!' prefix, then table lookup
            b.call(rcmd, parser)
            b.call(parser, "strcmp")
            for _ in range(10):
                b.call(parser, "system")
            for worker in entries[2:]:
                b.spawn(parser, worker)
        else:
            for worker in entries[1:]:
                b.spawn(server, worker)
        for entry in entries:
            handler = b.func()
            b.call(entry, handler)
            b.call(handler, recv_fns[thread_no % 25])
            if thread_no % 13 == 0:
                b.call(handler, copy_fns[(thread_no // 13) % 5])
            b.call(handler, log)
            thread_no += 1

    assert thread_no == 65, thread_no
    doc = {
        "cgx_version": 1,
        "entry": "main",
        "functions": b.functions,
        "calls": b.calls,
        "spawns": b.spawns,
        "consts": b.consts,
    }
    with open("apollo.cgx.json", "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    main()
