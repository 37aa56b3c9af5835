import { escapeHtml } from './html.js';

// Flat persona cards: a name and a voice-tone label, nothing animated.
export interface PersonaCard {
  personaId: string;
  displayName: string;
  toneLabel: string;
}

export const PERSONAS: PersonaCard[] = [
  { personaId: 'sage', displayName: 'Sage', toneLabel: 'Neutral' },
  { personaId: 'nova', displayName: 'Nova', toneLabel: 'Encouraging' },
  { personaId: 'pixel', displayName: 'Pixel', toneLabel: 'Humorous' },
  { personaId: 'ada', displayName: 'Ada', toneLabel: 'Informative' },
  { personaId: 'finn', displayName: 'Finn', toneLabel: 'Friendly' },
];

export function personaCardHtml(card: PersonaCard, selected = false): string {
  return `<button class="persona-card${selected ? ' selected' : ''}" ` +
    `data-persona="${escapeHtml(card.personaId)}">` +
    `<span class="persona-name">${escapeHtml(card.displayName)}</span>` +
    `<span class="persona-tone">${escapeHtml(card.toneLabel)}</span></button>`;
}
