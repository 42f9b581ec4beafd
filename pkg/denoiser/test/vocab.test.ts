import { describe, expect, it } from 'vitest';

import { EOS, PAD, SOS, UNK, UNK_OUTPUT, Vocab } from '../src/vocab.js';

describe('Vocab', () => {
  it('reserves special ids and sorts characters', () => {
    const vocab = Vocab.build(['bca', 'ääkköset']);
    expect(vocab.encode('a')).toBeGreaterThan(UNK);
    expect([PAD, SOS, EOS, UNK]).toEqual([0, 1, 2, 3]);
    const charIds = [...'abc'].map((c) => vocab.encode(c));
    expect(charIds).toEqual([...charIds].sort((x, y) => x - y));
  });

  it('maps unknown characters to UNK instead of throwing', () => {
    const vocab = Vocab.build(['abc']);
    expect(vocab.encode('Z')).toBe(UNK);
    expect(vocab.encodeToken('aZc')).toEqual([vocab.encode('a'), UNK, vocab.encode('c')]);
  });

  it('round-trips through JSON', () => {
    const vocab = Vocab.build(['kirkonkylän']);
    const loaded = Vocab.fromJSON(JSON.parse(JSON.stringify(vocab.toJSON())));
    expect(loaded.chars).toEqual(vocab.chars);
  });

  it('decodes UNK to the replacement character and specials to nothing', () => {
    const vocab = Vocab.build(['ab']);
    expect(vocab.decodeId(UNK)).toBe(UNK_OUTPUT);
    expect(vocab.decodeId(SOS)).toBe('');
    expect(vocab.decodeId(vocab.encode('a'))).toBe('a');
  });
});
