/** Backend selection: wasm (XNNPACK SIMD) when available, plain cpu otherwise. */

import * as tf from '@tensorflow/tfjs';
import '@tensorflow/tfjs-backend-wasm';

let initialized: Promise<string> | null = null;

export function initBackend(): Promise<string> {
  if (!initialized) {
    initialized = (async () => {
      try {
        await tf.setBackend('wasm');
        await tf.ready();
      } catch {
        await tf.setBackend('cpu');
        await tf.ready();
      }
      return tf.getBackend();
    })();
  }
  return initialized;
}
