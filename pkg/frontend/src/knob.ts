// Rotary steering knob: vertical drag or mouse wheel, 0.5 degree detents,
// 0-100 degree range. Purely a view; every change lands in the onChange
// callback and nothing else.

export const KNOB_STEP_DEG = 0.5;
const MIN_DEG = 0;
const MAX_DEG = 100;
const DRAG_DEG_PER_PX = 0.5;
// Knob rotates 270 degrees of dial travel over the 0-100 command range.
const DIAL_START_DEG = -135;
const DIAL_SWEEP_DEG = 270;

export function quantizeKnob(valueDeg: number): number {
  const snapped = Math.round(valueDeg / KNOB_STEP_DEG) * KNOB_STEP_DEG;
  return Math.min(MAX_DEG, Math.max(MIN_DEG, snapped));
}

export class Knob {
  valueDeg = 0;
  onChange: (valueDeg: number) => void = () => {};

  private dragging = false;
  private dragStartY = 0;
  private dragStartValue = 0;

  constructor(
    private readonly dial: HTMLElement,
    private readonly readout: HTMLElement,
  ) {
    dial.addEventListener("pointerdown", (ev) => {
      this.dragging = true;
      this.dragStartY = ev.clientY;
      this.dragStartValue = this.valueDeg;
      dial.setPointerCapture(ev.pointerId);
    });
    dial.addEventListener("pointermove", (ev) => {
      if (!this.dragging) return;
      this.set(this.dragStartValue + (this.dragStartY - ev.clientY) * DRAG_DEG_PER_PX);
    });
    dial.addEventListener("pointerup", () => {
      this.dragging = false;
    });
    dial.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      this.set(this.valueDeg - Math.sign(ev.deltaY) * KNOB_STEP_DEG);
    }, { passive: false });
    this.render();
  }

  set(valueDeg: number): void {
    const next = quantizeKnob(valueDeg);
    if (next === this.valueDeg) return;
    this.valueDeg = next;
    this.render();
    this.onChange(next);
  }

  /** Update the needle without firing onChange (e.g. on reconnect). */
  show(valueDeg: number): void {
    this.valueDeg = quantizeKnob(valueDeg);
    this.render();
  }

  private render(): void {
    const frac = (this.valueDeg - MIN_DEG) / (MAX_DEG - MIN_DEG);
    const angle = DIAL_START_DEG + frac * DIAL_SWEEP_DEG;
    this.dial.style.transform = `rotate(${angle}deg)`;
    this.readout.textContent = `${this.valueDeg.toFixed(1)}°`;
    this.dial.setAttribute("aria-valuenow", this.valueDeg.toFixed(1));
  }
}
