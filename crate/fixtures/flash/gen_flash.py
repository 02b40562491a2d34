#!/usr/bin/env python3
"""Builds the synthetic 8 MiB SPI flash dump and the standalone uImage fixture.

The layout is synthetic (the vendor's offsets are not public). Every CRC is
computed with zlib.crc32, independently of the Rust implementation.
Erased flash reads as 0xFF, which also keeps the committed blob compressible.
"""
import json
import struct
import zlib

FLASH_SIZE = 8 * 1024 * 1024

LAYOUT = [
    ("bootstrap", 0x000000, 0x040000),
    ("uboot-env", 0x040000, 0x010000),
    ("uboot", 0x050000, 0x0B0000),
    ("kernel", 0x100000, 0x200000),
    ("data", 0x300000, 0x100000),
    ("app", 0x400000, 0x400000),
]


def uimage(payload, name=b"Linux-3.0.8", load=0x80008000, entry=0x80008000):
    header = struct.pack(
        ">IIIIIIIBBBB32s",
        0x27051956,
        0,
        1_400_000_000,
        len(payload),
        load,
        entry,
        zlib.crc32(payload) & 0xFFFFFFFF,
        5,  # IH_OS_LINUX
        2,  # IH_ARCH_ARM
        2,  # IH_TYPE_KERNEL
        0,  # IH_COMP_NONE
        name.ljust(32, b"\0"),
    )
    hcrc = zlib.crc32(header) & 0xFFFFFFFF
    header = header[:4] + struct.pack(">I", hcrc) + header[8:]
    return header + payload


def uboot_env(size=0x10000):
    pairs = [
        b"bootargs=mem=64M console=ttyAMA0,115200 root=/dev/mtdblock3",
        b"bootcmd=sf probe 0;sf read 0x82000000 0x100000 0x200000;bootm 0x82000000",
        b"bootdelay=1",
        b"baudrate=115200",
        b"ipaddr=192.168.55.1",
    ]
    body = b"\0".join(pairs) + b"\0\0"
    body = body.ljust(size - 4, b"\0")
    return struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF) + body


def jffs2_cleanmarker():
    # magic 0x1985, JFFS2_NODETYPE_CLEANMARKER 0x2003, totlen 12, hdr_crc
    head = struct.pack("<HHI", 0x1985, 0x2003, 12)
    # JFFS2 header CRC: crc32 seeded with 0 and without the final inversion
    crc = (zlib.crc32(head, 0xFFFFFFFF) ^ 0xFFFFFFFF) & 0xFFFFFFFF
    return head + struct.pack("<I", crc)


def squashfs_superblock(bytes_used):
    sb = struct.pack(
        "<4sIIIIHHHHHHQQQQQQQQ",
        b"hsqs",
        4,  # inode count
        1_677_628_800,  # 2023-03-01T00:00:00Z
        131072,  # block size
        0,  # fragments
        4,  # compression: xz
        17,  # block log
        0x00C0,  # flags
        1,  # id count
        4,  # major
        0,  # minor
        0x60,  # root inode
        bytes_used,
        0x60, 0x60, 0x60, 0x60, 0x60, 0x60,
    )
    assert len(sb) == 96
    return sb


def build():
    flash = bytearray(b"\xff" * FLASH_SIZE)

    def put(off, blob):
        flash[off:off + len(blob)] = blob

    put(0x000000, b"BOOTSTRAP v1.2 (synthetic)\n")
    put(0x040000, uboot_env())
    put(0x050000, b"U-Boot 2010.06 (synthetic)\0")
    kernel_payload = bytes((i * 7 + 3) & 0xFF for i in range(1024))
    put(0x100000, uimage(kernel_payload))
    for block in range(0x300000, 0x400000, 0x10000):
        put(block, jffs2_cleanmarker())
    put(0x400000, squashfs_superblock(0x1000) + b"\0" * (0x1000 - 96))

    with open("flash.bin", "wb") as fh:
        fh.write(flash)
    with open("layout.json", "w") as fh:
        entries = [
            {"name": name, "offset": "0x%06x" % off, "length": "0x%06x" % length}
            for name, off, length in LAYOUT
        ]
        json.dump(entries, fh, indent=2)
        fh.write("\n")
    with open("uimage.bin", "wb") as fh:
        fh.write(uimage(kernel_payload))


if __name__ == "__main__":
    build()
