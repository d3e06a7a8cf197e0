// Camera feed panel: shows the newest frame at native resolution, a
// placeholder before the first frame or after a decode failure. Ordering
// (stale-frame dropping) already happened in the client; this module only
// renders what it is given.

import { FramePayload } from "./protocol.js";

export class FeedView {
  onDecodeFailure: (detail: string) => void = () => {};

  constructor(
    private readonly img: HTMLImageElement,
    private readonly placeholder: HTMLElement,
  ) {
    img.addEventListener("error", () => {
      this.showPlaceholder("frame failed to decode");
    });
    img.addEventListener("load", () => {
      this.img.style.display = "";
      this.placeholder.style.display = "none";
    });
  }

  update(frame: FramePayload): void {
    if (frame.encoding !== "png") {
      this.showPlaceholder(`unsupported encoding ${frame.encoding}`);
      return;
    }
    this.img.src = `data:image/png;base64,${frame.data}`;
  }

  private showPlaceholder(detail: string): void {
    this.img.style.display = "none";
    this.placeholder.style.display = "";
    this.onDecodeFailure(detail);
  }
}
