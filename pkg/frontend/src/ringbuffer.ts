// Fixed-capacity ring buffer for chart history. Oldest entries are evicted
// first; the buffer never grows past its capacity no matter how long the
// session runs.

export class RingBuffer<T> {
  private items: T[] = [];
  private start = 0;

  constructor(readonly capacity: number) {
    if (!Number.isInteger(capacity) || capacity <= 0) {
      throw new RangeError(`capacity must be a positive integer, got ${capacity}`);
    }
  }

  get length(): number {
    return this.items.length;
  }

  push(item: T): void {
    if (this.items.length < this.capacity) {
      this.items.push(item);
      return;
    }
    this.items[this.start] = item;
    this.start = (this.start + 1) % this.capacity;
  }

  /** i = 0 is the oldest retained entry. */
  at(i: number): T {
    if (i < 0 || i >= this.items.length) {
      throw new RangeError(`index ${i} out of range (length ${this.items.length})`);
    }
    return this.items[(this.start + i) % this.capacity];
  }

  last(): T | undefined {
    return this.length === 0 ? undefined : this.at(this.length - 1);
  }

  toArray(): T[] {
    const out: T[] = new Array(this.items.length);
    for (let i = 0; i < this.items.length; i++) out[i] = this.at(i);
    return out;
  }

  clear(): void {
    this.items = [];
    this.start = 0;
  }
}
