import { describe, expect, it } from "vitest";

import { clipDurationMs, frameIndexAt } from "../src/playback.js";

describe("clipDurationMs", () => {
  it("keeps clips between 1 and 2 seconds", () => {
    expect(clipDurationMs(10)).toBe(1000); // short segments stretch to 1s
    expect(clipDurationMs(50)).toBe(1650); // 50 frames at ~30fps
    expect(clipDurationMs(500)).toBe(2000); // long segments compress to 2s
  });
});

describe("frameIndexAt", () => {
  it("maps clip start to frame 0 and clip end to the last frame", () => {
    expect(frameIndexAt(0, 50)).toBe(0);
    expect(frameIndexAt(1649, 50)).toBe(49);
  });

  it("loops after the clip duration", () => {
    const d = clipDurationMs(50);
    expect(frameIndexAt(d, 50)).toBe(0);
    expect(frameIndexAt(d + 33, 50)).toBe(frameIndexAt(33, 50));
  });

  it("never exceeds the frame count", () => {
    for (let t = 0; t < 5000; t += 7) {
      const index = frameIndexAt(t, 50);
      expect(index).toBeGreaterThanOrEqual(0);
      expect(index).toBeLessThan(50);
    }
  });

  it("handles empty frame lists", () => {
    expect(frameIndexAt(123, 0)).toBe(0);
  });
});
