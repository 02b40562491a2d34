#!/usr/bin/env python3
"""Derives the golden (caller, callee) call-edge set for fixture.elf.

Uses capstone for A32 disassembly and pyelftools for ELF structure, so the
golden file does not depend on the Rust decoder it checks. PLT stubs are
resolved by disassembling each stub and following its GOT slot arithmetic
to the matching R_ARM_JUMP_SLOT relocation.
"""
import sys

from capstone import CS_ARCH_ARM, CS_MODE_ARM, Cs
from capstone.arm import ARM_OP_IMM
from elftools.elf.elffile import ELFFile


def modified_imm(raw):
    # A32 data-processing immediate: imm8 rotated right by 2 * rot4.
    word = int.from_bytes(raw, "little")
    imm8 = word & 0xFF
    rot = ((word >> 8) & 0xF) * 2
    return ((imm8 >> rot) | (imm8 << (32 - rot))) & 0xFFFFFFFF if rot else imm8


def main(path):
    with open(path, "rb") as fh:
        elf = ELFFile(fh)
        text = elf.get_section_by_name(".text")
        plt = elf.get_section_by_name(".plt")
        relplt = elf.get_section_by_name(".rel.plt")
        dynsym = elf.get_section_by_name(".dynsym")
        symtab = elf.get_section_by_name(".symtab")

        got_to_name = {
            rel["r_offset"]: dynsym.get_symbol(rel["r_info_sym"]).name
            for rel in relplt.iter_relocations()
        }

        md = Cs(CS_ARCH_ARM, CS_MODE_ARM)
        md.detail = True
        stub_to_name = {}
        plt_data = plt.data()
        base = plt["sh_addr"]
        for off in range(0, len(plt_data), 4):
            addr = base + off
            insns = list(md.disasm(plt_data[off:off + 12], addr))
            if len(insns) != 3:
                continue
            a, b, c = insns
            if not (a.mnemonic == "add" and a.op_str.startswith("ip, pc,")):
                continue
            if not (b.mnemonic == "add" and b.op_str.startswith("ip, ip,")):
                continue
            if c.mnemonic != "ldr" or not c.op_str.startswith("pc, [ip"):
                continue
            ip = addr + 8 + modified_imm(a.bytes)
            ip += modified_imm(b.bytes)
            ip += c.operands[1].mem.disp
            if ip in got_to_name:
                stub_to_name[addr] = got_to_name[ip]

        funcs = sorted(
            (s["st_value"] & ~1, s.name)
            for s in symtab.iter_symbols()
            if s["st_info"]["type"] == "STT_FUNC" and s["st_shndx"] != "SHN_UNDEF"
        )
        starts = {addr: name for addr, name in funcs}

        mapping = sorted(
            (s["st_value"], s.name[:2])
            for s in symtab.iter_symbols()
            if s.name.startswith("$a") or s.name.startswith("$d")
        )
        tlo = text["sh_addr"]
        thi = tlo + text["sh_size"]
        data = text.data()

        def in_arm(addr):
            state = "$a"
            for maddr, kind in mapping:
                if tlo <= maddr <= addr:
                    state = kind
            return state == "$a"

        def owner(addr):
            best = None
            for start, name in funcs:
                if start <= addr:
                    best = name
            return best

        edges = set()
        for off in range(0, len(data), 4):
            addr = tlo + off
            if not in_arm(addr):
                continue
            for insn in md.disasm(data[off:off + 4], addr):
                if insn.mnemonic not in ("bl", "blx"):
                    continue
                op = insn.operands[0]
                if op.type != ARM_OP_IMM:
                    continue
                target = op.imm
                callee = stub_to_name.get(target) or starts.get(target)
                if callee is None:
                    callee = "FUN_%08x" % target
                edges.add((owner(addr), callee))
        assert tlo < thi
        for caller, callee in sorted(edges):
            print(caller, callee)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "fixture.elf")
