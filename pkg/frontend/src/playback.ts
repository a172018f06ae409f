// Clip timing: trace playback runs a whole segment in one short clip
// (1-2 seconds), looping until the labeler decides.

const MS_PER_FRAME = 33;
const MIN_CLIP_MS = 1000;
const MAX_CLIP_MS = 2000;

export function clipDurationMs(frameCount: number): number {
  const natural = frameCount * MS_PER_FRAME;
  return Math.min(MAX_CLIP_MS, Math.max(MIN_CLIP_MS, natural));
}

/** Frame index to show at elapsed ms since clip start; loops. */
export function frameIndexAt(elapsedMs: number, frameCount: number): number {
  if (frameCount <= 0) return 0;
  const duration = clipDurationMs(frameCount);
  const phase = ((elapsedMs % duration) + duration) % duration;
  const index = Math.floor((phase / duration) * frameCount);
  return Math.min(index, frameCount - 1);
}
