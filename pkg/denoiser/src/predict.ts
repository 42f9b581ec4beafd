/**
 * Beam-search decoding. Tokens are grouped by length and decoded in
 * parallel: the encoder runs once per group, then the decoder re-runs over
 * the growing prefix each step for every live beam (prefix re-execution
 * instead of incremental LSTM state threading keeps decoding a pure
 * function of the saved graph).
 */

import * as tf from '@tensorflow/tfjs';

import { ModelArtifact, inferenceModels } from './model.js';
import { EOS, SOS, Vocab } from './vocab.js';

interface Beam {
  ids: number[];
  logProb: number;
}

interface Hypothesis extends Beam {
  done: boolean;
}

function oneHotRows(rows: number[][], vocabSize: number): tf.Tensor3D {
  const width = rows[0].length;
  const data = new Float32Array(rows.length * width * vocabSize);
  for (let b = 0; b < rows.length; b++) {
    for (let t = 0; t < width; t++) {
      data[(b * width + t) * vocabSize + rows[b][t]] = 1;
    }
  }
  return tf.tensor3d(data, [rows.length, width, vocabSize]);
}

/** Deterministic top-k: larger probability wins, ties to the smaller id. */
function topK(probs: Float32Array, k: number): Array<{ id: number; logProb: number }> {
  const order = Array.from(probs.keys()).sort((a, b) => probs[b] - probs[a] || a - b);
  return order.slice(0, k).map((id) => ({ id, logProb: Math.log(probs[id] + 1e-12) }));
}

export class Decoder {
  private readonly encoder: tf.LayersModel;
  private readonly decoder: tf.LayersModel;
  private readonly vocab: Vocab;

  constructor(artifact: ModelArtifact) {
    const { encoder, decoder } = inferenceModels(
      artifact.model,
      artifact.vocab.size,
      artifact.config.layers,
    );
    this.encoder = encoder;
    this.decoder = decoder;
    this.vocab = artifact.vocab;
  }

  /** Decode one group of equal-length tokens with a shared beam width. */
  private decodeGroup(tokens: string[], beamSize: number): string[] {
    const vocabSize = this.vocab.size;
    const srcLen = [...tokens[0]].length;
    const maxSteps = srcLen + 4;
    const encIn = oneHotRows(
      tokens.map((t) => this.vocab.encodeToken(t)),
      vocabSize,
    );
    const encSeq = this.encoder.predictOnBatch(encIn) as tf.Tensor3D;
    encIn.dispose();

    const live: Hypothesis[][] = tokens.map(() => [{ ids: [], logProb: 0, done: false }]);
    const bestFinished: Array<Hypothesis | null> = tokens.map(() => null);

    for (let step = 0; step < maxSteps; step++) {
      const rows: number[][] = [];
      const owners: Array<{ token: number; beam: number }> = [];
      live.forEach((beams, tokenIdx) => {
        beams.forEach((beam, beamIdx) => {
          rows.push([SOS, ...beam.ids]);
          owners.push({ token: tokenIdx, beam: beamIdx });
        });
      });
      if (rows.length === 0) break;

      const decIn = oneHotRows(rows, vocabSize);
      const encRows = tf.tidy(() => {
        const indices = tf.tensor1d(owners.map((o) => o.token), 'int32');
        return tf.gather(encSeq, indices);
      });
      const probs = this.decoder.predictOnBatch([decIn, encRows]) as tf.Tensor3D;
      const lastStep = tf.tidy(() =>
        probs
          .slice([0, rows[0].length - 1, 0], [rows.length, 1, vocabSize])
          .reshape([rows.length, vocabSize]),
      );
      const flat = lastStep.dataSync() as Float32Array;
      tf.dispose([decIn, encRows, probs, lastStep]);

      const expansions: Hypothesis[][] = tokens.map(() => []);
      owners.forEach(({ token, beam }, rowIdx) => {
        const parent = live[token][beam];
        const dist = flat.subarray(rowIdx * vocabSize, (rowIdx + 1) * vocabSize);
        for (const { id, logProb } of topK(dist, beamSize)) {
          expansions[token].push({
            ids: [...parent.ids, id],
            logProb: parent.logProb + logProb,
            done: id === EOS,
          });
        }
      });
      for (let t = 0; t < tokens.length; t++) {
        if (live[t].length === 0) continue;
        expansions[t].sort(
          (a, b) => b.logProb - a.logProb || a.ids.join(',').localeCompare(b.ids.join(',')),
        );
        const keep: Hypothesis[] = [];
        for (const hyp of expansions[t]) {
          if (hyp.done) {
            const incumbent = bestFinished[t];
            if (!incumbent || hyp.logProb > incumbent.logProb) bestFinished[t] = hyp;
          } else if (keep.length < beamSize) {
            keep.push(hyp);
          }
        }
        // Extending a hypothesis can only lower its score, so once the best
        // finished hypothesis outscores every live one the search is done.
        const incumbent = bestFinished[t];
        if (incumbent && (keep.length === 0 || incumbent.logProb >= keep[0].logProb)) {
          live[t] = [];
        } else {
          live[t] = keep;
        }
      }
      if (live.every((beams) => beams.length === 0)) break;
    }
    encSeq.dispose();

    return tokens.map((_, t) => {
      const finished = bestFinished[t];
      // Fall back to the best live prefix only when nothing ever finished
      // within the step cap.
      const best =
        finished ??
        live[t].reduce((a, b) => (b.logProb > a.logProb ? b : a), live[t][0]);
      const ids = best.done ? best.ids.slice(0, -1) : best.ids;
      return ids.map((id) => this.vocab.decodeId(id)).join('');
    });
  }

  /** Decode tokens in input order; output always has one line per input. */
  decode(tokens: string[], beamSize: number, groupLimit = 48): string[] {
    const byLength = new Map<number, number[]>();
    tokens.forEach((token, i) => {
      const len = [...token].length;
      let group = byLength.get(len);
      if (!group) {
        group = [];
        byLength.set(len, group);
      }
      group.push(i);
    });
    const out = new Array<string>(tokens.length);
    for (const len of [...byLength.keys()].sort((a, b) => a - b)) {
      const indices = byLength.get(len)!;
      if (len === 0) {
        for (const i of indices) out[i] = '';
        continue;
      }
      for (let start = 0; start < indices.length; start += groupLimit) {
        const chunk = indices.slice(start, start + groupLimit);
        const decoded = this.decodeGroup(
          chunk.map((i) => tokens[i]),
          beamSize,
        );
        chunk.forEach((tokenIdx, j) => {
          out[tokenIdx] = decoded[j];
        });
      }
    }
    return out;
  }
}
