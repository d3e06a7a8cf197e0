import { describe, expect, it } from "vitest";

import { RingBuffer } from "../src/ringbuffer.js";

describe("RingBuffer", () => {
  it("holds items in insertion order below capacity", () => {
    const buf = new RingBuffer<number>(5);
    buf.push(1);
    buf.push(2);
    buf.push(3);
    expect(buf.length).toBe(3);
    expect(buf.toArray()).toEqual([1, 2, 3]);
    expect(buf.at(0)).toBe(1);
    expect(buf.last()).toBe(3);
  });

  it("never exceeds capacity and evicts oldest first", () => {
    const buf = new RingBuffer<number>(3);
    for (let i = 0; i < 10; i++) buf.push(i);
    expect(buf.length).toBe(3);
    expect(buf.toArray()).toEqual([7, 8, 9]);
  });

  it("keeps evicting in order across many wraps", () => {
    const buf = new RingBuffer<number>(4);
    for (let i = 0; i < 1001; i++) {
      buf.push(i);
      expect(buf.length).toBeLessThanOrEqual(4);
    }
    expect(buf.toArray()).toEqual([997, 998, 999, 1000]);
  });

  it("rejects nonsense capacities", () => {
    expect(() => new RingBuffer(0)).toThrow(RangeError);
    expect(() => new RingBuffer(-1)).toThrow(RangeError);
    expect(() => new RingBuffer(2.5)).toThrow(RangeError);
  });

  it("range-checks at()", () => {
    const buf = new RingBuffer<number>(2);
    buf.push(1);
    expect(() => buf.at(1)).toThrow(RangeError);
    expect(() => buf.at(-1)).toThrow(RangeError);
  });

  it("clear() empties without breaking subsequent pushes", () => {
    const buf = new RingBuffer<number>(2);
    buf.push(1);
    buf.push(2);
    buf.push(3);
    buf.clear();
    expect(buf.length).toBe(0);
    buf.push(9);
    expect(buf.toArray()).toEqual([9]);
  });
});
